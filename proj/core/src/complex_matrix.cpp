#include "jsr/complex_matrix.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jsr {

ComplexMatrix::ComplexMatrix(Matrix re_in, Matrix im_in)
    : re(std::move(re_in)), im(std::move(im_in)) {
  if (re.rows() != im.rows() || re.cols() != im.cols()) {
    throw ShapeError("ComplexMatrix: re and im dimensions differ");
  }
}

ComplexMatrix ComplexMatrix::zero(Eigen::Index rows, Eigen::Index cols) {
  return {Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
}

ComplexMatrix ComplexMatrix::identity(Eigen::Index n) {
  return {Matrix::Identity(n, n), Matrix::Zero(n, n)};
}

bool ComplexMatrix::all_finite() const {
  return re.allFinite() && im.allFinite();
}

double ComplexMatrix::squared_frobenius() const {
  return re.squaredNorm() + im.squaredNorm();
}

double ComplexMatrix::row_norm(Eigen::Index i) const {
  return std::sqrt(re.row(i).squaredNorm() + im.row(i).squaredNorm());
}

double ComplexMatrix::col_squared_norm(Eigen::Index j) const {
  return re.col(j).squaredNorm() + im.col(j).squaredNorm();
}

ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("ComplexMatrix +: dimension mismatch");
  }
  return {a.re + b.re, a.im + b.im};
}

ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("ComplexMatrix -: dimension mismatch");
  }
  return {a.re - b.re, a.im - b.im};
}

ComplexMatrix operator*(double s, const ComplexMatrix& a) {
  return {s * a.re, s * a.im};
}

ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& x) {
  if (a.cols() != x.rows()) {
    throw ShapeError("complex_matmul: inner dimensions differ");
  }
  ComplexMatrix out;
  out.re.noalias() = a.re * x.re;
  out.re.noalias() -= a.im * x.im;
  out.im.noalias() = a.im * x.re;
  out.im.noalias() += a.re * x.im;
  return out;
}

ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("adjoint_matmul: row counts differ");
  }
  ComplexMatrix out;
  out.re.noalias() = a.re.transpose() * b.re;
  out.re.noalias() += a.im.transpose() * b.im;
  out.im.noalias() = a.re.transpose() * b.im;
  out.im.noalias() -= a.im.transpose() * b.re;
  return out;
}

Vector col_squared_norms(const ComplexMatrix& a) {
  return (a.re.colwise().squaredNorm() + a.im.colwise().squaredNorm()).transpose();
}

void write_matrix(std::ostream& os, const ComplexMatrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g", m.re(i, j), m.im(i, j));
      if (j > 0) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

ComplexMatrix read_matrix(std::istream& is) {
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) {
    throw ConfigError("matrix file: bad header, expected \"rows cols\"");
  }
  ComplexMatrix m = ComplexMatrix::zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(is >> m.re(i, j) >> m.im(i, j))) {
        throw ConfigError("matrix file: truncated data");
      }
    }
  }
  return m;
}

void save_matrix(const ComplexMatrix& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  write_matrix(os, m);
}

ComplexMatrix load_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  return read_matrix(is);
}

}  // namespace jsr
