#include "roughflow/controlled.hpp"

#include <algorithm>

#include "roughflow/csv.hpp"

namespace roughflow {

bool same_rough_path(const RoughPath& a, const RoughPath& b) {
  if (&a == &b) return true;
  return a.alpha() == b.alpha() && a.grid() == b.grid() && a.path() == b.path() &&
         a.step_areas() == b.step_areas();
}

ControlledPath::ControlledPath(RoughPathPtr reference, Eigen::MatrixXd values,
                               Eigen::MatrixXd derivs)
    : reference_(std::move(reference)), values_(std::move(values)), derivs_(std::move(derivs)) {
  require(reference_ != nullptr, "controlled path: missing reference rough path");
  require(values_.rows() >= 1, "controlled path: dimension must be at least 1");
  require(values_.cols() == reference_->size(), "controlled path: values do not match the grid");
  require(derivs_.rows() == values_.rows() * reference_->dim() && derivs_.cols() == values_.cols(),
          "controlled path: derivative block must be (m*l) x nodes");
}

bool ControlledPath::same_reference(const ControlledPath& other) const {
  return reference_ == other.reference_ || same_rough_path(*reference_, *other.reference_);
}

Eigen::VectorXd ControlledPath::remainder(Index i, Index j) const {
  return increment(i, j) - deriv(i) * reference_->increment(i, j);
}

ControlledPath ControlledPath::block(Index row, Index rows) const {
  require(row >= 0 && rows >= 1 && row + rows <= dim(), "controlled block: rows out of range");
  const Index l = ref_dim();
  Eigen::MatrixXd d(rows * l, size());
  for (Index k = 0; k < size(); ++k) {
    Eigen::Map<Eigen::MatrixXd> out(d.col(k).data(), rows, l);
    out = deriv(k).middleRows(row, rows);
  }
  return {reference_, values_.middleRows(row, rows), std::move(d)};
}

ControlledPath& ControlledPath::operator+=(const ControlledPath& other) {
  require(same_reference(other), "controlled paths over different references");
  require(dim() == other.dim(), "controlled paths of different dimension");
  values_ += other.values_;
  derivs_ += other.derivs_;
  return *this;
}

ControlledPath& ControlledPath::operator-=(const ControlledPath& other) {
  require(same_reference(other), "controlled paths over different references");
  require(dim() == other.dim(), "controlled paths of different dimension");
  values_ -= other.values_;
  derivs_ -= other.derivs_;
  return *this;
}

ControlledPath& ControlledPath::operator*=(double c) {
  values_ *= c;
  derivs_ *= c;
  return *this;
}

ControlledPath ControlledPath::shifted(const Eigen::VectorXd& c) const {
  require(c.size() == dim(), "shift: dimension mismatch");
  ControlledPath out = *this;
  out.values_.colwise() += c;
  return out;
}

ControlledPath operator+(ControlledPath a, const ControlledPath& b) { return a += b; }
ControlledPath operator-(ControlledPath a, const ControlledPath& b) { return a -= b; }
ControlledPath operator*(double c, ControlledPath a) { return a *= c; }

ControlledPath from_constant(const Eigen::VectorXd& c, RoughPathPtr reference) {
  require(reference != nullptr, "from_constant: missing reference");
  const Index n = reference->size();
  Eigen::MatrixXd values = c.replicate(1, n);
  Eigen::MatrixXd derivs = Eigen::MatrixXd::Zero(c.size() * reference->dim(), n);
  return {std::move(reference), std::move(values), std::move(derivs)};
}

ControlledPath from_reference(RoughPathPtr reference) {
  require(reference != nullptr, "from_reference: missing reference");
  const Index l = reference->dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(l, l);
  Eigen::MatrixXd derivs =
      Eigen::Map<const Eigen::VectorXd>(eye.data(), l * l).replicate(1, reference->size());
  Eigen::MatrixXd values = reference->path();
  return {std::move(reference), std::move(values), std::move(derivs)};
}

ControlledPath compose_smooth(const SmoothMap& phi, const ControlledPath& z) {
  require(phi.cols() == 1, "compose_smooth: phi must be vector valued (one column)");
  require(phi.in_dim() == z.dim(), "compose_smooth: phi input dimension differs from z");
  const Index n = phi.rows();
  const Index l = z.ref_dim();
  Eigen::MatrixXd values(n, z.size());
  Eigen::MatrixXd derivs(n * l, z.size());
  for (Index k = 0; k < z.size(); ++k) {
    const Eigen::VectorXd x = z.value(k);
    values.col(k) = phi.value(x);
    const auto zp = z.deriv(k);
    for (Index a = 0; a < l; ++a)
      derivs.col(k).segment(a * n, n) = phi.d1(x, zp.col(a));
  }
  return {z.reference(), std::move(values), std::move(derivs)};
}

ControlledPath stack(const std::vector<ControlledPath>& parts) {
  require(!parts.empty(), "stack: nothing to stack");
  Index total = 0;
  for (const auto& p : parts) {
    require(p.same_reference(parts.front()), "stack: controlled paths over different references");
    total += p.dim();
  }
  const Index l = parts.front().ref_dim();
  const Index n = parts.front().size();
  Eigen::MatrixXd values(total, n);
  Eigen::MatrixXd derivs(total * l, n);
  for (Index k = 0; k < n; ++k) {
    Eigen::Map<Eigen::MatrixXd> out(derivs.col(k).data(), total, l);
    Index row = 0;
    for (const auto& p : parts) {
      values.col(k).segment(row, p.dim()) = p.values().col(k);
      out.middleRows(row, p.dim()) = p.deriv(k);
      row += p.dim();
    }
  }
  return {parts.front().reference(), std::move(values), std::move(derivs)};
}

ControlledPath stack(const ControlledPath& a, const ControlledPath& b) { return stack({a, b}); }

ControlledNormParts controlled_norm_parts(const ControlledPath& z, Index first, Index last) {
  require(0 <= first && first <= last && last < z.size(), "controlled_norm: bad node range");
  const double alpha = z.alpha();
  const Grid& grid = z.grid();
  const RoughPath& x = *z.reference();
  ControlledNormParts parts;
  parts.start = z.values().col(first).norm();
  parts.derivative =
      holder_norm_pairs(grid, first, last, alpha, [&z](Index i, Index j) {
        return (z.derivs().col(j) - z.derivs().col(i)).norm();
      }).norm;
  parts.remainder =
      holder_norm_pairs(grid, first, last, 2.0 * alpha, [&](Index i, Index j) {
        return (z.values().col(j) - z.values().col(i) - z.deriv(i) * x.increment(i, j)).norm();
      }).norm;
  return parts;
}

double controlled_norm(const ControlledPath& z, Index first, Index last) {
  return controlled_norm_parts(z, first, last).total();
}

double controlled_norm(const ControlledPath& z) { return controlled_norm(z, 0, z.size() - 1); }

double controlled_norm_with_derivative(const ControlledPath& z, Index first, Index last) {
  return controlled_norm(z, first, last) + z.derivs().col(first).norm();
}

double controlled_norm_with_derivative(const ControlledPath& z) {
  return controlled_norm_with_derivative(z, 0, z.size() - 1);
}

namespace {

csv::Table controlled_table(const ControlledPath& z) {
  const Index m = z.dim();
  const Index l = z.ref_dim();
  csv::Table table;
  table.header.push_back("t");
  for (Index i = 1; i <= m; ++i) table.header.push_back("z" + std::to_string(i));
  for (Index i = 1; i <= m; ++i)
    for (Index j = 1; j <= l; ++j)
      table.header.push_back("zp" + std::to_string(i) + std::to_string(j));
  for (Index k = 0; k < z.size(); ++k) {
    std::vector<double> row;
    row.push_back(z.grid().t(k));
    for (Index i = 0; i < m; ++i) row.push_back(z.values()(i, k));
    const auto zp = z.deriv(k);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < l; ++j) row.push_back(zp(i, j));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

std::string controlled_path_csv(const ControlledPath& z) {
  return csv::to_string(controlled_table(z));
}

void write_controlled_path_csv(const std::string& file, const ControlledPath& z) {
  csv::write(file, controlled_table(z));
}

ControlledPath read_controlled_path_csv(const std::string& file, RoughPathPtr reference) {
  require(reference != nullptr, "read_controlled_path_csv: missing reference");
  const csv::Table table = csv::read(file);
  const Index l = reference->dim();
  const auto cols = static_cast<Index>(table.header.size()) - 1;
  require(cols >= 1 && cols % (1 + l) == 0, file + ": column count does not fit t,z..,zp..");
  const Index m = cols / (1 + l);
  const auto n = static_cast<Index>(table.rows.size());
  require(n == reference->size(), file + ": row count differs from the reference grid");
  Eigen::MatrixXd values(m, n);
  Eigen::MatrixXd derivs(m * l, n);
  for (Index k = 0; k < n; ++k) {
    const auto& row = table.rows[static_cast<std::size_t>(k)];
    require(row[0] == reference->grid().t(k), file + ": time column differs from the reference grid");
    for (Index i = 0; i < m; ++i) values(i, k) = row[static_cast<std::size_t>(1 + i)];
    Eigen::Map<Eigen::MatrixXd> zp(derivs.col(k).data(), m, l);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < l; ++j) zp(i, j) = row[static_cast<std::size_t>(1 + m + i * l + j)];
  }
  return {std::move(reference), std::move(values), std::move(derivs)};
}

}  // namespace roughflow
