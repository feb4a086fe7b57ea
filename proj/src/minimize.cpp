#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "oscid/identify.hpp"

namespace oscid {

namespace {

constexpr double kInitialStep = 0.05;

struct Vertex {
  Eigen::Vector3d y;  // box-normalized
  Eigen::Vector3d x;
  double f;
};

class Evaluator {
 public:
  Evaluator(const Objective3& f, const Bounds& b, int budget, std::vector<double>& trace)
      : f_(f), lower_(b.lower), width_(b.upper - b.lower), budget_(budget), trace_(trace) {}

  Eigen::Vector3d to_x(const Eigen::Vector3d& y) const {
    return (lower_ + width_.cwiseProduct(y)).cwiseMax(lower_).cwiseMin(lower_ + width_);
  }

  Vertex operator()(const Eigen::Vector3d& y_raw) {
    const Eigen::Vector3d y = y_raw.cwiseMax(0.0).cwiseMin(1.0);
    return at(y, to_x(y));
  }

  Vertex at(const Eigen::Vector3d& y, const Eigen::Vector3d& x) {
    double v;
    try {
      v = f_(x);
    } catch (const std::exception& e) {
      throw EvaluationFailed(std::string("objective failed: ") + e.what(),
                             {x[0], x[1], x[2]});
    }
    if (std::isnan(v))
      throw EvaluationFailed("objective returned NaN", {x[0], x[1], x[2]});
    ++used_;
    if (v < best_.f) best_ = {y, x, v};
    trace_.push_back(best_.f);
    return {y, x, v};
  }

  bool exhausted() const { return used_ >= budget_; }
  int used() const { return used_; }
  const Vertex& best() const { return best_; }

 private:
  const Objective3& f_;
  Eigen::Vector3d lower_;
  Eigen::Vector3d width_;
  int budget_;
  int used_ = 0;
  Vertex best_{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
               std::numeric_limits<double>::infinity()};
  std::vector<double>& trace_;
};

double diameter(const std::array<Vertex, 4>& s) {
  double d = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i)
    d = std::max(d, (s[i].y - s[0].y).lpNorm<Eigen::Infinity>());
  return d;
}

// One Nelder-Mead descent from an already evaluated vertex.
void descend(Evaluator& eval, const Vertex& start, const Eigen::Array<bool, 3, 1>& free,
             double inner_tol) {
  std::array<Vertex, 4> s;
  s[0] = start;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d y = start.y;
    if (free[i]) y[i] += y[i] + kInitialStep > 1.0 ? -kInitialStep : kInitialStep;
    if (eval.exhausted()) return;
    s[i + 1] = eval(y);
  }
  const auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };

  while (!eval.exhausted()) {
    std::sort(s.begin(), s.end(), by_value);
    if (diameter(s) < inner_tol) return;
    const Eigen::Vector3d centroid = (s[0].y + s[1].y + s[2].y) / 3.0;
    const Vertex& worst = s[3];

    const Vertex r = eval(centroid + (centroid - worst.y));
    if (r.f < s[0].f) {
      if (eval.exhausted()) { s[3] = r; return; }
      const Vertex e = eval(centroid + 2.0 * (centroid - worst.y));
      s[3] = e.f < r.f ? e : r;
      continue;
    }
    if (r.f < s[2].f) {
      s[3] = r;
      continue;
    }
    if (eval.exhausted()) return;
    const bool outside = r.f < worst.f;
    const Vertex c = outside ? eval(centroid + 0.5 * (r.y - centroid))
                             : eval(centroid + 0.5 * (worst.y - centroid));
    if (c.f < std::min(r.f, worst.f)) {
      s[3] = c;
      continue;
    }
    for (std::size_t i = 1; i < s.size() && !eval.exhausted(); ++i)
      s[i] = eval(s[0].y + 0.5 * (s[i].y - s[0].y));
  }
}

}  // namespace

MinimizeResult minimize_box(const Objective3& f, const Eigen::Vector3d& x0,
                            const Bounds& bounds, double inner_tol, int max_evaluations) {
  if (!bounds.valid()) throw InvalidInput("bounds need lower <= upper");
  if (!bounds.contains(x0)) throw InvalidInput("starting point lies outside the bounds");
  if (max_evaluations < 1) throw InvalidInput("evaluation budget must be positive");

  MinimizeResult out;
  Evaluator eval(f, bounds, max_evaluations, out.trace);
  const Eigen::Vector3d width = bounds.upper - bounds.lower;
  const Eigen::Array<bool, 3, 1> free = width.array() > 0;
  Eigen::Vector3d y0 = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i)
    if (free[i]) y0[i] = (x0[i] - bounds.lower[i]) / width[i];

  Vertex start = eval.at(y0, x0);
  while (!eval.exhausted()) {
    descend(eval, start, free, inner_tol);
    const Vertex& best = eval.best();
    if (!(best.f < start.f)) break;  // the restart found nothing new
    start = best;
  }

  const Vertex& best = eval.best();
  out.x = best.x;
  out.value = best.f;
  out.evaluations = eval.used();
  out.at_lower = free && (out.x.array() <= bounds.lower.array());
  out.at_upper = free && (out.x.array() >= bounds.upper.array());
  return out;
}

}  // namespace oscid
