#include "modelsel/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace modelsel::reach {

// --- Box -------------------------------------------------------------------

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw std::invalid_argument("box bounds differ in size");
  if (lo_.hasNaN() || hi_.hasNaN()) throw std::invalid_argument("box has NaN bounds");
  if ((lo_.array() > hi_.array()).any()) throw std::invalid_argument("box has lo > hi");
  empty_ = false;
}

Box Box::empty(Index dim) {
  Box b;
  b.lo_ = Eigen::VectorXd::Zero(dim);
  b.hi_ = Eigen::VectorXd::Zero(dim);
  b.empty_ = true;
  return b;
}

Box Box::point(const Eigen::VectorXd& x) { return Box(x, x); }

Box Box::around(const Eigen::VectorXd& center, const Eigen::VectorXd& radius) {
  if ((radius.array() < 0.0).any()) throw std::invalid_argument("negative box radius");
  return Box(center - radius, center + radius);
}

bool Box::contains(const Eigen::VectorXd& x) const {
  if (empty_ || x.size() != dim()) return false;
  return (lo_.array() <= x.array()).all() && (x.array() <= hi_.array()).all();
}

bool Box::contains(const Box& other) const {
  if (other.empty_) return true;
  if (empty_ || other.dim() != dim()) return false;
  return (lo_.array() <= other.lo_.array()).all() && (other.hi_.array() <= hi_.array()).all();
}

void Box::expand_to(const Box& other) {
  if (other.empty_) return;
  if (empty_) {
    *this = other;
    return;
  }
  if (other.dim() != dim()) throw std::invalid_argument("hull of boxes of different dimension");
  lo_ = lo_.cwiseMin(other.lo_);
  hi_ = hi_.cwiseMax(other.hi_);
}

bool operator==(const Box& a, const Box& b) {
  if (a.empty_ || b.empty_) return a.empty_ == b.empty_ && a.dim() == b.dim();
  return a.lo_ == b.lo_ && a.hi_ == b.hi_;
}

// --- IntervalMatrix --------------------------------------------------------

bool IntervalMatrix::contains(const Eigen::MatrixXd& m) const {
  if (m.rows() != rows() || m.cols() != cols()) return false;
  return (lo.array() <= m.array()).all() && (m.array() <= hi.array()).all();
}

void IntervalMatrix::validate() const {
  if (lo.rows() != hi.rows() || lo.cols() != hi.cols())
    throw std::invalid_argument("interval matrix bounds differ in shape");
  if (lo.rows() != lo.cols() || lo.rows() == 0)
    throw std::invalid_argument("interval matrix must be square and non-empty");
  if (!lo.allFinite() || !hi.allFinite())
    throw std::invalid_argument("interval matrix has non-finite entries");
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("interval matrix has lo > hi");
}

// --- sampling --------------------------------------------------------------

std::size_t required_samples(double p, double delta, Index n, std::size_t t) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("confidence p must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (n < 1 || t < 1) throw std::invalid_argument("dimension and horizon must be positive");

  const double facets = 2.0 * static_cast<double>(n) * static_cast<double>(t);
  const double q = (1.0 - p) / facets;
  const double log_target = std::log(delta / facets);
  const double log_miss = std::log1p(-q);
  auto ok = [&](double N) { return N * log_miss <= log_target; };

  double N = std::max(1.0, std::ceil(log_target / log_miss));
  while (!ok(N)) N += 1.0;
  while (N > 1.0 && ok(N - 1.0)) N -= 1.0;
  return static_cast<std::size_t>(N);
}

StatReachConfig StatReachConfig::from_confidence(double p, double delta, Index n, std::size_t t,
                                                 double cost_per_sample) {
  StatReachConfig cfg;
  cfg.confidence = p;
  cfg.type1 = delta;
  cfg.horizon = t;
  cfg.n_samples = required_samples(p, delta, n, t);
  cfg.cost = cost_per_sample * static_cast<double>(cfg.n_samples);
  return cfg;
}

void UnsafeSet::validate() const {
  if (coords.empty()) throw std::invalid_argument("unsafe set needs at least one coordinate");
  for (Index c : coords)
    if (c < 0) throw std::invalid_argument("negative coordinate index in unsafe set");
  for (const auto& ob : obstacles)
    if (ob.dim() != static_cast<Index>(coords.size()))
      throw std::invalid_argument("obstacle dimension does not match coordinate list");
}

Eigen::MatrixXd sample_matrix(const IntervalMatrix& lambda, Rng& rng) {
  Eigen::MatrixXd m(lambda.rows(), lambda.cols());
  for (Index i = 0; i < lambda.rows(); ++i)
    for (Index j = 0; j < lambda.cols(); ++j) m(i, j) = rng.uniform(lambda.lo(i, j), lambda.hi(i, j));
  return m;
}

Box step_box(const Eigen::MatrixXd& A, const Box& S) {
  if (A.cols() != S.dim()) throw std::invalid_argument("step_box: dimension mismatch");
  if (S.is_empty()) return Box::empty(A.rows());
  Eigen::VectorXd lo(A.rows()), hi(A.rows());
  for (Index i = 0; i < A.rows(); ++i) {
    double l = 0.0, h = 0.0;
    for (Index j = 0; j < A.cols(); ++j) {
      const double a = A(i, j) * S.lo()(j);
      const double b = A(i, j) * S.hi()(j);
      l += std::min(a, b);
      h += std::max(a, b);
    }
    lo(i) = l;
    hi(i) = h;
  }
  return Box(std::move(lo), std::move(hi));
}

namespace {

// Row-major list of structurally non-zero entries. Iterating it in order
// consumes randomness exactly like sample_matrix, and skipped entries would
// only have added +0.0 to the interval sums.
struct SparseEntry {
  Index row;
  Index col;
  double lo;
  double hi;
};

struct PartialHull {
  std::vector<Eigen::VectorXd> lo;
  std::vector<Eigen::VectorXd> hi;
};

PartialHull hull_range(const std::vector<SparseEntry>& entries, Index dim, const Box& x0,
                       std::size_t horizon, std::uint64_t seed, std::size_t begin,
                       std::size_t end) {
  PartialHull part;
  const double inf = std::numeric_limits<double>::infinity();
  part.lo.assign(horizon, Eigen::VectorXd::Constant(dim, inf));
  part.hi.assign(horizon, Eigen::VectorXd::Constant(dim, -inf));

  std::vector<double> a(entries.size());
  Eigen::VectorXd cur_lo(dim), cur_hi(dim), nxt_lo(dim), nxt_hi(dim);
  for (std::size_t k = begin; k < end; ++k) {
    Rng rng(derive_seed(seed, {k}));
    for (std::size_t e = 0; e < entries.size(); ++e) a[e] = rng.uniform(entries[e].lo, entries[e].hi);

    cur_lo = x0.lo();
    cur_hi = x0.hi();
    for (std::size_t step = 0; step < horizon; ++step) {
      nxt_lo.setZero();
      nxt_hi.setZero();
      for (std::size_t e = 0; e < entries.size(); ++e) {
        const Index i = entries[e].row;
        const Index j = entries[e].col;
        const double u = a[e] * cur_lo(j);
        const double v = a[e] * cur_hi(j);
        nxt_lo(i) += std::min(u, v);
        nxt_hi(i) += std::max(u, v);
      }
      cur_lo.swap(nxt_lo);
      cur_hi.swap(nxt_hi);
      part.lo[step] = part.lo[step].cwiseMin(cur_lo);
      part.hi[step] = part.hi[step].cwiseMax(cur_hi);
    }
  }
  return part;
}

}  // namespace

ReachResult reach_sampled(const IntervalMatrix& lambda, const Box& x0,
                          const StatReachConfig& cfg, std::uint64_t seed, unsigned threads) {
  lambda.validate();
  if (x0.dim() != lambda.cols()) throw std::invalid_argument("reach_sampled: x0 dimension mismatch");
  if (cfg.n_samples < 1 || cfg.horizon < 1)
    throw std::invalid_argument("reach_sampled: need at least one sample and one step");

  ReachResult result;
  result.samples_used = cfg.n_samples;
  result.cost = cfg.cost;
  const Index dim = lambda.rows();
  if (x0.is_empty()) {
    result.boxes.assign(cfg.horizon, Box::empty(dim));
    return result;
  }

  std::vector<SparseEntry> entries;
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j)
      if (lambda.lo(i, j) != 0.0 || lambda.hi(i, j) != 0.0)
        entries.push_back({i, j, lambda.lo(i, j), lambda.hi(i, j)});

  const std::size_t n = cfg.n_samples;
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  std::vector<PartialHull> parts(workers);
  if (workers == 1) {
    parts[0] = hull_range(entries, dim, x0, cfg.horizon, seed, 0, n);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        parts[w] = hull_range(entries, dim, x0, cfg.horizon, seed, begin, end);
      });
    }
  }

  result.boxes.reserve(cfg.horizon);
  for (std::size_t step = 0; step < cfg.horizon; ++step) {
    Eigen::VectorXd lo = parts[0].lo[step];
    Eigen::VectorXd hi = parts[0].hi[step];
    for (std::size_t w = 1; w < workers; ++w) {
      lo = lo.cwiseMin(parts[w].lo[step]);
      hi = hi.cwiseMax(parts[w].hi[step]);
    }
    result.boxes.emplace_back(std::move(lo), std::move(hi));
  }
  return result;
}

// --- bloating, calibration, safety -----------------------------------------

Box bloat(const Box& S, double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("bloat radius must be >= 0");
  if (S.is_empty()) return S;
  return Box(S.lo().array() - mu, S.hi().array() + mu);
}

std::vector<Box> bloat(std::span<const Box> boxes, double mu) {
  std::vector<Box> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(bloat(b, mu));
  return out;
}

BloatCalibration calibrate_bloat(std::span<const std::pair<ReachResult, ReachResult>> runs,
                                 std::span<const Index> coords) {
  if (runs.empty()) throw std::invalid_argument("calibration set is empty");
  double mu = 0.0;
  for (const auto& [fast, slow] : runs) {
    if (fast.boxes.size() != slow.boxes.size())
      throw std::invalid_argument("calibration pair has different horizons");
    for (std::size_t k = 0; k < fast.boxes.size(); ++k) {
      const Box& f = fast.boxes[k];
      const Box& s = slow.boxes[k];
      if (s.is_empty()) continue;
      if (f.is_empty() || f.dim() != s.dim())
        throw std::invalid_argument("fast set cannot be bloated to cover the slow set");
      // The subtraction can round down by an ulp; step mu up until the
      // bloated bounds, computed as bloat() computes them, really cover s.
      auto deficit = [&](Index c) {
        mu = std::max({mu, f.lo()(c) - s.lo()(c), s.hi()(c) - f.hi()(c)});
        while (f.lo()(c) - mu > s.lo()(c) || f.hi()(c) + mu < s.hi()(c))
          mu = std::nextafter(mu, std::numeric_limits<double>::infinity());
      };
      if (coords.empty()) {
        for (Index c = 0; c < f.dim(); ++c) deficit(c);
      } else {
        for (Index c : coords) {
          if (c < 0 || c >= f.dim()) throw std::out_of_range("calibration coordinate out of range");
          deficit(c);
        }
      }
    }
  }
  BloatCalibration cal;
  cal.mu = mu;
  cal.n_runs = runs.size();
  if (mu > 1.0) cal.epsilon = 1.0 - 1.0 / mu;
  return cal;
}

bool intersects(const Box& S, const UnsafeSet& U) {
  for (Index c : U.coords)
    if (c < 0 || c >= S.dim())
      throw std::out_of_range("unsafe-set coordinate " + std::to_string(c) +
                              " outside box of dimension " + std::to_string(S.dim()));
  if (S.is_empty()) return false;
  for (const auto& ob : U.obstacles) {
    if (ob.is_empty()) continue;
    bool overlap = true;
    for (std::size_t k = 0; k < U.coords.size() && overlap; ++k) {
      const Index c = U.coords[k];
      const Index kk = static_cast<Index>(k);
      overlap = S.lo()(c) <= ob.hi()(kk) && ob.lo()(kk) <= S.hi()(c);
    }
    if (overlap) return true;
  }
  return false;
}

Loss loss_nav(std::span<const Box> boxes, const UnsafeSet& U) {
  for (const auto& b : boxes)
    if (intersects(b, U)) return Loss::infinite();
  return Loss{};
}

Action select_rs(const ReachResult& fast, double mu, const UnsafeSet& U) {
  for (const auto& b : fast.boxes)
    if (intersects(bloat(b, mu), U)) return Action::InvokeSlow;
  return Action::UseFast;
}

}  // namespace modelsel::reach
