#pragma once

#include <cstddef>
#include <vector>

namespace foldlab {

using Vec = std::vector<double>;

// --- small vector helpers -------------------------------------------------

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);
double norm_inf(const Vec& x);
Vec add(const Vec& x, const Vec& y);
Vec sub(const Vec& x, const Vec& y);
Vec scaled(const Vec& x, double s);
void axpy(Vec& y, double a, const Vec& x);  // y += a*x
Vec normalized(const Vec& x);               // x / ||x||_2
bool all_finite(const Vec& x);
double min_element(const Vec& x);
double max_element(const Vec& x);

// Square real matrix, row-major; row index = output coordinate.
class DenseOperator {
 public:
  DenseOperator() = default;
  explicit DenseOperator(int dim);  // zero matrix
  DenseOperator(int dim, std::vector<double> entries);

  static DenseOperator identity(int dim);
  static DenseOperator diagonal(const Vec& d);
  // phi * phi_star^T (rank one)
  static DenseOperator outer(const Vec& phi, const Vec& phi_star);

  int dim() const { return dim_; }
  double operator()(int i, int j) const { return a_[std::size_t(i) * dim_ + j]; }
  double& operator()(int i, int j) { return a_[std::size_t(i) * dim_ + j]; }

  Vec apply(const Vec& v) const;
  Vec apply_transpose(const Vec& v) const;
  DenseOperator transpose() const;
  DenseOperator multiply(const DenseOperator& rhs) const;

  void add_scaled_identity(double s);                       // A += s*I
  void add_scaled(const DenseOperator& other, double s);    // A += s*other
  void scale(double s);

  double max_abs() const;
  double frobenius_norm() const;
  double min_entry() const;
  // max |A_ij - A_ji|; zero for symmetric matrices.
  double symmetry_defect() const;
  // symmetric flag per the 1e-12 * max|A| entrywise criterion
  bool is_symmetric(double rel_tol = 1e-12) const;

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

 private:
  int dim_ = 0;
  std::vector<double> a_;
};

}  // namespace foldlab
