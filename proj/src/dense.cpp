#include "foldlab/dense.hpp"

#include <algorithm>
#include <cmath>

#include "foldlab/errors.hpp"

namespace foldlab {

namespace {
void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) fail(Err::InvalidArgument, "vector dimensions differ");
}
}  // namespace

double dot(const Vec& x, const Vec& y) {
  require_same_dim(x.size(), y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const Vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

Vec add(const Vec& x, const Vec& y) {
  require_same_dim(x.size(), y.size());
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
  return r;
}

Vec sub(const Vec& x, const Vec& y) {
  require_same_dim(x.size(), y.size());
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

Vec scaled(const Vec& x, double s) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = s * x[i];
  return r;
}

void axpy(Vec& y, double a, const Vec& x) {
  require_same_dim(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vec normalized(const Vec& x) {
  double n = norm2(x);
  if (n == 0.0) fail(Err::InvalidArgument, "cannot normalize the zero vector");
  return scaled(x, 1.0 / n);
}

bool all_finite(const Vec& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

double min_element(const Vec& x) { return *std::min_element(x.begin(), x.end()); }
double max_element(const Vec& x) { return *std::max_element(x.begin(), x.end()); }

DenseOperator::DenseOperator(int dim) : dim_(dim), a_(std::size_t(dim) * dim, 0.0) {
  if (dim < 1) fail(Err::InvalidArgument, "DenseOperator needs dim >= 1");
}

DenseOperator::DenseOperator(int dim, std::vector<double> entries)
    : dim_(dim), a_(std::move(entries)) {
  if (dim < 1) fail(Err::InvalidArgument, "DenseOperator needs dim >= 1");
  if (a_.size() != std::size_t(dim) * dim)
    fail(Err::InvalidArgument, "entry count does not match dim*dim");
  for (double v : a_)
    if (!std::isfinite(v)) fail(Err::InvalidArgument, "non-finite matrix entry");
}

DenseOperator DenseOperator::identity(int dim) {
  DenseOperator I(dim);
  for (int i = 0; i < dim; ++i) I(i, i) = 1.0;
  return I;
}

DenseOperator DenseOperator::diagonal(const Vec& d) {
  DenseOperator D(int(d.size()));
  for (int i = 0; i < D.dim(); ++i) D(i, i) = d[i];
  return D;
}

DenseOperator DenseOperator::outer(const Vec& phi, const Vec& phi_star) {
  require_same_dim(phi.size(), phi_star.size());
  DenseOperator R(int(phi.size()));
  for (int i = 0; i < R.dim(); ++i)
    for (int j = 0; j < R.dim(); ++j) R(i, j) = phi[i] * phi_star[j];
  return R;
}

Vec DenseOperator::apply(const Vec& v) const {
  require_same_dim(v.size(), std::size_t(dim_));
  Vec r(dim_, 0.0);
  for (int i = 0; i < dim_; ++i) {
    const double* row = a_.data() + std::size_t(i) * dim_;
    double s = 0.0;
    for (int j = 0; j < dim_; ++j) s += row[j] * v[j];
    r[i] = s;
  }
  return r;
}

Vec DenseOperator::apply_transpose(const Vec& v) const {
  require_same_dim(v.size(), std::size_t(dim_));
  Vec r(dim_, 0.0);
  for (int i = 0; i < dim_; ++i) {
    const double vi = v[i];
    const double* row = a_.data() + std::size_t(i) * dim_;
    for (int j = 0; j < dim_; ++j) r[j] += row[j] * vi;
  }
  return r;
}

DenseOperator DenseOperator::transpose() const {
  DenseOperator R(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) R(j, i) = (*this)(i, j);
  return R;
}

DenseOperator DenseOperator::multiply(const DenseOperator& rhs) const {
  if (rhs.dim_ != dim_) fail(Err::InvalidArgument, "matrix dimensions differ");
  DenseOperator R(dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int k = 0; k < dim_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      const double* rrow = rhs.a_.data() + std::size_t(k) * dim_;
      double* orow = R.a_.data() + std::size_t(i) * dim_;
      for (int j = 0; j < dim_; ++j) orow[j] += aik * rrow[j];
    }
  }
  return R;
}

void DenseOperator::add_scaled_identity(double s) {
  for (int i = 0; i < dim_; ++i) (*this)(i, i) += s;
}

void DenseOperator::add_scaled(const DenseOperator& other, double s) {
  if (other.dim_ != dim_) fail(Err::InvalidArgument, "matrix dimensions differ");
  for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += s * other.a_[k];
}

void DenseOperator::scale(double s) {
  for (double& v : a_) v *= s;
}

double DenseOperator::max_abs() const {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

double DenseOperator::frobenius_norm() const {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

double DenseOperator::min_entry() const { return *std::min_element(a_.begin(), a_.end()); }

double DenseOperator::symmetry_defect() const {
  double m = 0.0;
  for (int i = 0; i < dim_; ++i)
    for (int j = i + 1; j < dim_; ++j)
      m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
  return m;
}

bool DenseOperator::is_symmetric(double rel_tol) const {
  return symmetry_defect() <= rel_tol * std::max(max_abs(), 1e-300);
}

}  // namespace foldlab
