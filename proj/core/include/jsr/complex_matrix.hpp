#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>

#include "jsr/errors.hpp"

namespace jsr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Complex matrix carried as a (re, im) pair of equally shaped real matrices.
// Everything downstream (solvers, network, training) works on these pairs;
// no native complex storage is used anywhere.
struct ComplexMatrix {
  Matrix re, im;

  ComplexMatrix() = default;
  ComplexMatrix(Matrix re_in, Matrix im_in);

  static ComplexMatrix zero(Eigen::Index rows, Eigen::Index cols);
  static ComplexMatrix identity(Eigen::Index n);

  Eigen::Index rows() const { return re.rows(); }
  Eigen::Index cols() const { return re.cols(); }

  bool all_finite() const;
  double squared_frobenius() const;
  double row_norm(Eigen::Index i) const;
  double col_squared_norm(Eigen::Index j) const;
};

ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator*(double s, const ComplexMatrix& a);

// A * X over the real pairs:
//   (Re(A)Re(X) - Im(A)Im(X), Im(A)Re(X) + Re(A)Im(X))
ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& x);

// A^H * B
ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b);

// Squared column norms of A over both parts, as a real vector.
Vector col_squared_norms(const ComplexMatrix& a);

// Textual matrix format: first line "rows cols", then one line per row with
// 2*cols space-separated values interleaved re im re im ..., printed with 17
// significant digits so doubles round-trip exactly.
void write_matrix(std::ostream& os, const ComplexMatrix& m);
ComplexMatrix read_matrix(std::istream& is);
void save_matrix(const ComplexMatrix& m, const std::string& path);
ComplexMatrix load_matrix(const std::string& path);

}  // namespace jsr
