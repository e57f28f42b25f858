#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "rlcov/error.hpp"
#include "rlcov/rlr.hpp"

namespace rlcov {

using Eigen::MatrixXd;

RLRMatrix::RLRMatrix(std::shared_ptr<const Topology> topology, bool symmetric)
    : topology_(std::move(topology)), symmetric_(symmetric) {
  if (!topology_) throw InvalidArgument("RLRMatrix: null topology");
  const Topology& t = *topology_;
  const int r = t.rank();
  f_.resize(t.size());
  for (int i = 0; i < t.size(); ++i) {
    NodeFactors& f = f_[i];
    if (t.is_leaf(i)) {
      f.A = MatrixXd::Zero(t.count(i), t.count(i));
      if (!t.is_root(i)) {
        f.U = MatrixXd::Zero(t.count(i), r);
        if (!symmetric_) f.V = MatrixXd::Zero(t.count(i), r);
      }
    } else {
      f.Sigma = MatrixXd::Zero(r, r);
      if (!t.is_root(i)) {
        f.W = MatrixXd::Zero(r, r);
        if (!symmetric_) f.Z = MatrixXd::Zero(r, r);
      }
    }
  }
}

void RLRMatrix::validate(double tol) const {
  const Topology& t = *topology_;
  const int r = t.rank();
  auto check = [&](const MatrixXd& m, int rows, int cols, const char* what, int i) {
    if (m.rows() != rows || m.cols() != cols)
      throw InvalidArgument(std::string("RLRMatrix: factor ") + what + " has the wrong shape at node " +
                            std::to_string(i));
  };
  auto check_sym = [&](const MatrixXd& m, const char* what, int i) {
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale)
      throw InvalidArgument(std::string("RLRMatrix: factor ") + what + " is not symmetric at node " +
                            std::to_string(i));
  };
  for (int i = 0; i < t.size(); ++i) {
    if (t.is_leaf(i)) {
      check(A(i), t.count(i), t.count(i), "A", i);
      if (!t.is_root(i)) {
        check(U(i), t.count(i), r, "U", i);
        check(V(i), t.count(i), r, "V", i);
      }
      if (symmetric_) check_sym(A(i), "A", i);
    } else {
      check(Sigma(i), r, r, "Sigma", i);
      if (!t.is_root(i)) {
        check(W(i), r, r, "W", i);
        check(Z(i), r, r, "Z", i);
      }
      if (symmetric_) check_sym(Sigma(i), "Sigma", i);
    }
  }
}

Eigen::MatrixXd to_dense(const RLRMatrix& A) {
  const Topology& t = A.topology();
  const int n = t.n();
  if (n > kDenseGuard) throw InvalidArgument("to_dense: n exceeds the dense guard of 4096");
  // Extended bases U_i, V_i over the full range of every nonroot node.
  std::vector<MatrixXd> U(t.size()), V(t.size());
  MatrixXd out = MatrixXd::Zero(n, n);
  walk_up(t, Exec::Serial, [&](int i) {
    if (t.is_leaf(i)) {
      out.block(t.begin(i), t.begin(i), t.count(i), t.count(i)) = A.A(i);
      if (!t.is_root(i)) {
        U[i] = A.U(i);
        V[i] = A.V(i);
      }
      return;
    }
    const auto& ch = t.children(i);
    for (std::size_t a = 0; a < ch.size(); ++a)
      for (std::size_t b = 0; b < ch.size(); ++b) {
        if (a == b || (A.symmetric() && b < a)) continue;
        const int ci = ch[a], cj = ch[b];
        MatrixXd blk = U[ci] * A.Sigma(i) * V[cj].transpose();
        out.block(t.begin(ci), t.begin(cj), t.count(ci), t.count(cj)) = blk;
        if (A.symmetric()) out.block(t.begin(cj), t.begin(ci), t.count(cj), t.count(ci)) = blk.transpose();
      }
    if (!t.is_root(i)) {
      U[i].resize(t.count(i), t.rank());
      V[i].resize(t.count(i), t.rank());
      for (int c : ch) {
        U[i].middleRows(t.begin(c) - t.begin(i), t.count(c)) = U[c] * A.W(i);
        V[i].middleRows(t.begin(c) - t.begin(i), t.count(c)) = V[c] * A.Z(i);
      }
    }
    for (int c : ch) {
      U[c].resize(0, 0);
      V[c].resize(0, 0);
    }
  });
  if (A.symmetric())
    for (int j = 0; j < n; ++j)
      for (int i = j + 1; i < n; ++i) out(i, j) = out(j, i);
  return out;
}

namespace {

constexpr char kMagic[8] = {'R', 'L', 'C', 'O', 'V', 'F', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InvalidArgument("load_factors: truncated input");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

void put_i64(std::ostream& out, std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); }
std::int64_t get_i64(std::istream& in) { return static_cast<std::int64_t>(get_u64(in)); }

void put_matrix(std::ostream& out, const MatrixXd& m) {
  put_i64(out, m.rows());
  put_i64(out, m.cols());
  for (Eigen::Index k = 0; k < m.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[k]));
}

void get_matrix(std::istream& in, MatrixXd& m) {
  const std::int64_t rows = get_i64(in), cols = get_i64(in);
  if (rows != m.rows() || cols != m.cols()) throw InvalidArgument("load_factors: factor shape mismatch");
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = std::bit_cast<double>(get_u64(in));
}

}  // namespace

void save_factors(std::ostream& out, const RLRMatrix& A) {
  const Topology& t = A.topology();
  out.write(kMagic, 8);
  put_i64(out, t.n());
  put_i64(out, t.rank());
  put_i64(out, t.size());
  put_i64(out, A.symmetric() ? 1 : 0);
  for (int i = 0; i < t.size(); ++i) {
    put_i64(out, t.parent(i));
    put_i64(out, t.begin(i));
    put_i64(out, t.end(i));
    put_i64(out, static_cast<std::int64_t>(t.children(i).size()));
    for (int c : t.children(i)) put_i64(out, c);
  }
  for (int i = 0; i < t.size(); ++i) {
    if (t.is_leaf(i)) {
      put_matrix(out, A.A(i));
      if (!t.is_root(i)) {
        put_matrix(out, A.U(i));
        if (!A.symmetric()) put_matrix(out, A.V(i));
      }
    } else {
      put_matrix(out, A.Sigma(i));
      if (!t.is_root(i)) {
        put_matrix(out, A.W(i));
        if (!A.symmetric()) put_matrix(out, A.Z(i));
      }
    }
  }
  if (!out) throw Error("save_factors: write failed");
}

RLRMatrix load_factors(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw InvalidArgument("load_factors: not a factor file");
  const std::int64_t n = get_i64(in), r = get_i64(in), count = get_i64(in), sym = get_i64(in);
  if (n < 1 || r < 1 || count < 1 || count > 2 * n || (sym != 0 && sym != 1))
    throw InvalidArgument("load_factors: bad header");
  std::vector<Topology::Node> nodes(count);
  for (auto& nd : nodes) {
    nd.parent = static_cast<int>(get_i64(in));
    nd.begin = static_cast<int>(get_i64(in));
    nd.end = static_cast<int>(get_i64(in));
    const std::int64_t k = get_i64(in);
    if (k < 0 || k > count) throw InvalidArgument("load_factors: bad child count");
    nd.children.resize(k);
    for (int& c : nd.children) c = static_cast<int>(get_i64(in));
  }
  auto topo = std::make_shared<const Topology>(std::move(nodes), static_cast<int>(r));
  if (topo->n() != n) throw InvalidArgument("load_factors: root range does not match n");
  RLRMatrix A(topo, sym == 1);
  for (int i = 0; i < topo->size(); ++i) {
    if (topo->is_leaf(i)) {
      get_matrix(in, A.A(i));
      if (!topo->is_root(i)) {
        get_matrix(in, A.U(i));
        if (!A.symmetric()) get_matrix(in, A.V(i));
      }
    } else {
      get_matrix(in, A.Sigma(i));
      if (!topo->is_root(i)) {
        get_matrix(in, A.W(i));
        if (!A.symmetric()) get_matrix(in, A.Z(i));
      }
    }
  }
  return A;
}

}  // namespace rlcov
