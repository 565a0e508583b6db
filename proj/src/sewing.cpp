#include "roughflow/sewing.hpp"

#include <algorithm>
#include <cmath>

namespace roughflow {

LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const double mx = x.mean();
  const double my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double syy = (y.array() - my).square().sum();
  require(sxx > 0.0, "fit_line: abscissae must not all coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

Eigen::MatrixXd sew(const Germ& mu, const Grid& grid) {
  require(mu.zeta > 1.0, "sew: germ exponent zeta must exceed 1");
  require(static_cast<bool>(mu.evaluate), "sew: germ has no evaluator");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mu.dim, grid.size());
  for (Index k = 0; k < grid.steps(); ++k) {
    const Eigen::VectorXd inc = mu.evaluate(grid.t(k), grid.t(k + 1));
    require(inc.size() == mu.dim, "sew: germ returned a vector of the wrong size");
    out.col(k + 1) = out.col(k) + inc;
  }
  return out;
}

DefectReport germ_defect(const Germ& mu, const Grid& grid, int min_level, int max_level) {
  const auto top = static_cast<int>(std::floor(std::log2(static_cast<double>(grid.steps()))));
  if (max_level < 0) max_level = top;
  require(min_level >= 1 && min_level <= max_level && max_level <= top,
          "germ_defect: dyadic levels out of range");
  const int count = max_level - min_level + 1;
  DefectReport report;
  report.scales.resize(count);
  report.defects.resize(count);
  for (int lv = min_level; lv <= max_level; ++lv) {
    const Index block = Index{1} << lv;
    double worst = 0.0;
    double width = 0.0;
    for (Index s = 0; s + block <= grid.steps(); s += block) {
      const Index u = s + block / 2;
      const Index t = s + block;
      const double ts = grid.t(s), tu = grid.t(u), tt = grid.t(t);
      const double d = (mu.evaluate(ts, tt) - mu.evaluate(tu, tt) - mu.evaluate(ts, tu)).norm();
      worst = std::max(worst, d);
      width = std::max(width, tt - ts);
    }
    report.scales(lv - min_level) = width;
    report.defects(lv - min_level) = worst;
  }
  if (count >= 2 && (report.defects.array() > 0.0).all()) {
    const LineFit fit = fit_line(report.scales.array().log().matrix(),
                                 report.defects.array().log().matrix());
    report.exponent = fit.slope;
    report.r_squared = fit.r_squared;
  }
  return report;
}

Germ controlled_germ(const ControlledPath& a, Index out_dim) {
  const Index l = a.ref_dim();
  require(out_dim >= 1 && a.dim() == out_dim * l,
          "rough integral: integrand must take values in L(R^l, R^m)");
  const double alpha = a.alpha();
  Germ mu;
  mu.dim = out_dim;
  mu.zeta = 3.0 * alpha;
  mu.evaluate = [a, out_dim, l](double s, double t) -> Eigen::VectorXd {
    const RoughPath& x = *a.reference();
    const Index i = x.grid().index_of(s);
    const Index j = x.grid().index_of(t);
    const Eigen::VectorXd dx = x.increment(i, j);
    const Eigen::MatrixXd area = x.area(i, j);
    const Eigen::Map<const Eigen::MatrixXd> as(a.values().col(i).data(), out_dim, l);
    Eigen::VectorXd out = as * dx;
    const auto ap = a.deriv(i);  // (m*l) x l
    for (Index b = 0; b < l; ++b) {
      const Eigen::Map<const Eigen::MatrixXd> apb(ap.col(b).data(), out_dim, l);
      out.noalias() += apb * area.row(b).transpose();
    }
    return out;
  };
  return mu;
}

Germ oneform_germ(const OneForm& f, const ControlledPath& z, const ControlledPath& y) {
  require(z.same_reference(y), "rough integral: z and y are controlled by different references");
  require(f.in_dim() == z.dim(), "rough integral: one-form input dimension differs from z");
  require(f.cols() == y.dim(), "rough integral: one-form column count differs from y");
  require(f.max_level() >= 1, "rough integral: one-form must be at least C^2");
  Germ mu;
  mu.dim = f.rows();
  mu.zeta = 3.0 * z.alpha();
  mu.evaluate = [f, z, y](double s, double t) -> Eigen::VectorXd {
    const RoughPath& x = *z.reference();
    const Index i = x.grid().index_of(s);
    const Index j = x.grid().index_of(t);
    const Eigen::VectorXd zs = z.value(i);
    Eigen::VectorXd out = f.value(zs) * y.increment(i, j);
    const Eigen::MatrixXd w = y.deriv(i) * x.area(i, j).transpose();
    const auto zp = z.deriv(i);
    for (Index a = 0; a < z.ref_dim(); ++a) {
      if (w.col(a).isZero(0.0) || zp.col(a).isZero(0.0)) continue;
      out.noalias() += f.d1(zs, zp.col(a)) * w.col(a);
    }
    return out;
  };
  return mu;
}

ControlledPath rough_integral_controlled(const ControlledPath& a, Index out_dim) {
  const Germ mu = controlled_germ(a, out_dim);
  Eigen::MatrixXd values = sew(mu, a.grid());
  Eigen::MatrixXd derivs = a.values();  // vec(a_s) is already vec(b'_s)
  return {a.reference(), std::move(values), std::move(derivs)};
}

ControlledPath rough_integral_oneform(const OneForm& f, const ControlledPath& z,
                                      const ControlledPath& y) {
  const Germ mu = oneform_germ(f, z, y);
  Eigen::MatrixXd values = sew(mu, z.grid());
  const Index m = f.rows();
  Eigen::MatrixXd derivs(m * z.ref_dim(), z.size());
  for (Index k = 0; k < z.size(); ++k) {
    Eigen::Map<Eigen::MatrixXd> out(derivs.col(k).data(), m, z.ref_dim());
    out.noalias() = f.value(z.value(k)) * y.deriv(k);
  }
  return {z.reference(), std::move(values), std::move(derivs)};
}

}  // namespace roughflow
