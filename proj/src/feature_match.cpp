#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rankphase/errors.hpp"
#include "rankphase/estimators.hpp"
#include "rankphase/model.hpp"

namespace rankphase {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxStates = 8'000'000;

// cost(i, k) = (S_i - theta_k)^2, k in [1, n].
class CostTable {
 public:
  CostTable(std::span<const double> scores, std::span<const double> theta)
      : n_(scores.size()), c_(n_ * n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = 0; k < n_; ++k) {
        const double d = scores[i] - theta[k];
        c_[i * n_ + k] = d * d;
      }
    }
  }

  std::size_t n() const { return n_; }
  double operator()(std::size_t i, int k) const {
    return c_[i * n_ + static_cast<std::size_t>(k - 1)];
  }

  int argmin(std::size_t i) const {
    int best = 1;
    for (int k = 2; k <= static_cast<int>(n_); ++k) {
      if ((*this)(i, k) < (*this)(i, best)) best = k;
    }
    return best;
  }

  bool convex(std::size_t i) const {
    double scale = 0.0;
    for (int k = 1; k <= static_cast<int>(n_); ++k) scale = std::max(scale, (*this)(i, k));
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    for (int k = 2; k < static_cast<int>(n_); ++k) {
      if ((*this)(i, k + 1) - 2.0 * (*this)(i, k) + (*this)(i, k - 1) < -tol) return false;
    }
    return true;
  }

 private:
  std::size_t n_;
  std::vector<double> c_;
};

void check_inputs(std::span<const double> scores, std::span<const double> theta,
                  const RankSpace& space) {
  if (scores.size() != theta.size() || scores.size() != space.n()) {
    throw InputError("feature_match: scores, theta and space must share n");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw InputError("feature_match: scores must be finite");
  }
}

// Exact under a single sum budget when every coordinate cost is convex in k:
// mixed-sign moves never help, and unit moves have nondecreasing marginal cost.
std::vector<int> greedy_sum_repair(const CostTable& cost, std::vector<int> r,
                                   const RankSpace& space) {
  const auto n = static_cast<int>(cost.n());
  std::int64_t sum = std::accumulate(r.begin(), r.end(), std::int64_t{0});
  const std::int64_t lo = space.identity_sum() - space.c_n();
  const std::int64_t hi = space.identity_sum() + space.c_n();
  const int dir = sum < lo ? +1 : -1;
  std::int64_t steps = dir > 0 ? lo - sum : sum - hi;

  using Move = std::pair<double, std::size_t>;
  std::priority_queue<Move, std::vector<Move>, std::greater<>> heap;
  auto push = [&](std::size_t i) {
    const int next = r[i] + dir;
    if (next >= 1 && next <= n) heap.emplace(cost(i, next) - cost(i, r[i]), i);
  };
  for (std::size_t i = 0; i < r.size(); ++i) push(i);
  while (steps-- > 0) {
    if (heap.empty()) throw std::logic_error("greedy repair ran out of moves");
    const auto [marginal, i] = heap.top();
    heap.pop();
    r[i] += dir;
    push(i);
  }
  return r;
}

struct PairHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const noexcept {
    const auto a = static_cast<std::uint64_t>(p.first);
    const auto b = static_cast<std::uint64_t>(p.second);
    return static_cast<std::size_t>(a * 0x9E3779B97F4A7C15ULL ^ (b + 0x632BE59BD9B4E019ULL));
  }
};

// Branch-and-bound dynamic program over coordinates. A state after coordinate
// i is the partial (sum, sum of squares) of the chosen ranks; it keeps the
// cheapest partial assignment reaching it.
class RepairSearch {
 public:
  RepairSearch(const CostTable& cost, const std::vector<int>& start, const RankSpace& space,
               bool convex)
      : cost_(cost),
        n_(cost.n()),
        track_sq_(space.has_square_budget()),
        convex_(convex),
        sum_lo_(space.identity_sum() - space.c_n()),
        sum_hi_(space.identity_sum() + space.c_n()),
        sq_lo_(track_sq_ ? space.identity_sum_of_squares() - *space.c_n_sq() : 0),
        sq_hi_(track_sq_ ? space.identity_sum_of_squares() + *space.c_n_sq() : 0) {
    const auto n_int = static_cast<int>(n_);
    candidates_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      auto& cands = candidates_[i];
      cands.reserve(n_);
      for (int k = 1; k <= n_int; ++k) cands.push_back({k, cost(i, k)});
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });
    }
    base_.assign(n_ + 1, 0.0);
    start_sum_.assign(n_ + 1, 0);
    start_sq_.assign(n_ + 1, 0);
    min_step_.assign(n_ + 1, kInf);
    up_rate_.assign(n_ + 1, kInf);
    down_rate_.assign(n_ + 1, kInf);
    for (std::size_t i = n_; i-- > 0;) {
      const int k = start[i];
      const double c0 = cost(i, k);
      base_[i] = base_[i + 1] + c0;
      start_sum_[i] = start_sum_[i + 1] + k;
      start_sq_[i] = start_sq_[i + 1] + static_cast<std::int64_t>(k) * k;
      min_step_[i] = std::min(min_step_[i + 1], candidates_[i][1].cost - candidates_[i][0].cost);
      const double up = k < n_int ? cost(i, k + 1) - c0 : kInf;
      const double down = k > 1 ? cost(i, k - 1) - c0 : kInf;
      up_rate_[i] = std::min(up_rate_[i + 1], up);
      down_rate_[i] = std::min(down_rate_[i + 1], down);
    }
    maximize_dual();
    for (std::size_t i = 0; i < n_; ++i) {
      std::stable_sort(candidates_[i].begin(), candidates_[i].end(),
                       [&](const Candidate& a, const Candidate& b) {
                         return a.cost + priced(a.rank) < b.cost + priced(b.rank);
                       });
    }
  }

  double dual_bound() const { return dual_; }

  // Lower bound on the total cost of any feasible completion, +inf if none.
  double lower_bound(std::size_t next, std::int64_t sum, std::int64_t sq, double cost) const {
    const auto rem = static_cast<std::int64_t>(n_ - next);
    const auto n = static_cast<std::int64_t>(n_);
    if (sum + rem > sum_hi_ || sum + rem * n < sum_lo_) return kInf;
    if (track_sq_ && (sq + rem > sq_hi_ || sq + rem * n * n < sq_lo_)) return kInf;
    const double lb = cost + base_[next];
    const std::int64_t cs = sum + start_sum_[next];
    const std::int64_t cq = sq + start_sq_[next];
    const bool sum_in = cs >= sum_lo_ && cs <= sum_hi_;
    const bool sq_in = !track_sq_ || (cq >= sq_lo_ && cq <= sq_hi_);
    if (sum_in && sq_in) return lb;
    if (rem == 0) return kInf;
    double extra = min_step_[next];
    if (convex_) {
      // Convex costs grow at least linearly away from the start.
      if (cs < sum_lo_) extra = std::max(extra, static_cast<double>(sum_lo_ - cs) * up_rate_[next]);
      if (cs > sum_hi_) extra = std::max(extra, static_cast<double>(cs - sum_hi_) * down_rate_[next]);
    }
    return lb + extra;
  }

  // Cheapest feasible assignment with cost at most `ceiling`, if any.
  std::optional<std::vector<int>> solve(double ceiling) const {
    const double limit = ceiling + 1e-10 * (1.0 + std::abs(ceiling));
    std::vector<std::vector<State>> layers(n_ + 1);
    layers[0].push_back(State{0, 0, 0.0, -1, 0});
    std::size_t total_states = 1;
    for (std::size_t i = 0; i < n_; ++i) {
      auto& next = layers[i + 1];
      std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::int32_t, PairHash> index;
      const auto& current = layers[i];
      for (std::size_t p = 0; p < current.size(); ++p) {
        const State s = current[p];
        const double priced_state = s.cost + lambda_ * static_cast<double>(s.sum) +
                                    nu_ * static_cast<double>(s.sq) - price_offset_;
        for (const Candidate& cand : candidates_[i]) {
          // Candidates come in order of priced cost, so the Lagrangian bound
          // only grows along the loop.
          if (priced_state + cand.cost + priced(cand.rank) + dual_suffix_[i + 1] >
              limit + dual_tol_) {
            break;
          }
          const double c = s.cost + cand.cost;
          if (c + base_[i + 1] > limit) continue;
          const std::int64_t nsum = s.sum + cand.rank;
          const std::int64_t nsq =
              track_sq_ ? s.sq + static_cast<std::int64_t>(cand.rank) * cand.rank : 0;
          if (lower_bound(i + 1, nsum, nsq, c) > limit) continue;
          const auto key = std::make_pair(nsum, nsq);
          const auto it = index.find(key);
          if (it == index.end()) {
            index.emplace(key, static_cast<std::int32_t>(next.size()));
            next.push_back(State{nsum, nsq, c, static_cast<std::int32_t>(p), cand.rank});
          } else if (c < next[static_cast<std::size_t>(it->second)].cost) {
            next[static_cast<std::size_t>(it->second)] =
                State{nsum, nsq, c, static_cast<std::int32_t>(p), cand.rank};
          }
        }
      }
      if (next.empty()) return std::nullopt;
      total_states += next.size();
      if (total_states > kMaxStates) {
        throw std::runtime_error("feature matching search exceeded its state budget");
      }
    }
    const auto& last = layers[n_];
    std::size_t best = 0;
    for (std::size_t p = 1; p < last.size(); ++p) {
      if (last[p].cost < last[best].cost) best = p;
    }
    std::vector<int> r(n_);
    std::int32_t at = static_cast<std::int32_t>(best);
    for (std::size_t i = n_; i-- > 0;) {
      const State& s = layers[i + 1][static_cast<std::size_t>(at)];
      r[i] = s.rank;
      at = s.parent;
    }
    return r;
  }

 private:
  struct Candidate {
    int rank;
    double cost;
  };

  struct DualPoint {
    double value;
    std::int64_t sum;  // of the priced argmins, a supergradient ingredient
    std::int64_t sq;
  };

  double priced(int k) const {
    const auto kd = static_cast<double>(k);
    return lambda_ * kd + nu_ * kd * kd;
  }

  // Lagrangian dual of the budgets at multipliers (lambda, nu): a lower
  // bound on the constrained minimum for any real pair.
  DualPoint dual_at(double lambda, double nu) const {
    DualPoint d{0.0, 0, 0};
    const auto n_int = static_cast<int>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double best = kInf;
      int arg = 1;
      for (int k = 1; k <= n_int; ++k) {
        const auto kd = static_cast<double>(k);
        const double v = cost_(i, k) + lambda * kd + nu * kd * kd;
        if (v < best) {
          best = v;
          arg = k;
        }
      }
      d.value += best;
      d.sum += arg;
      d.sq += static_cast<std::int64_t>(arg) * arg;
    }
    d.value -= lambda * static_cast<double>(lambda >= 0 ? sum_hi_ : sum_lo_);
    if (track_sq_) d.value -= nu * static_cast<double>(nu >= 0 ? sq_hi_ : sq_lo_);
    return d;
  }

  // Bisection on the sign of a supergradient of a concave function of one
  // multiplier. slope(x) > 0 means the maximum lies to the right of x.
  template <class Slope>
  static double concave_argmax(Slope slope) {
    if (slope(0.0) == 0) return 0.0;
    const int sign = slope(0.0) > 0 ? 1 : -1;
    double far = 1.0;
    for (int k = 0; k < 200 && slope(sign * far) * sign > 0; ++k) far *= 2.0;
    double lo = 0.0, hi = far;
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (lo + hi);
      (slope(sign * mid) * sign > 0 ? lo : hi) = mid;
    }
    return sign * 0.5 * (lo + hi);
  }

  int sum_slope(const DualPoint& d, double lambda) const {
    if (d.sum > sum_hi_ || (lambda < 0 && d.sum > sum_lo_)) return 1;
    if (d.sum < sum_lo_ || (lambda > 0 && d.sum < sum_hi_)) return -1;
    return 0;
  }

  double best_lambda(double nu) const {
    return concave_argmax([&](double lambda) { return sum_slope(dual_at(lambda, nu), lambda); });
  }

  void maximize_dual() {
    if (track_sq_) {
      nu_ = concave_argmax([&](double nu) {
        const DualPoint d = dual_at(best_lambda(nu), nu);
        if (d.sq > sq_hi_ || (nu < 0 && d.sq > sq_lo_)) return 1;
        if (d.sq < sq_lo_ || (nu > 0 && d.sq < sq_hi_)) return -1;
        return 0;
      });
    }
    lambda_ = best_lambda(nu_);
    price_offset_ = lambda_ * static_cast<double>(lambda_ >= 0 ? sum_hi_ : sum_lo_) +
                    (track_sq_ ? nu_ * static_cast<double>(nu_ >= 0 ? sq_hi_ : sq_lo_) : 0.0);
    dual_suffix_.assign(n_ + 1, 0.0);
    double magnitude = std::abs(price_offset_);
    for (std::size_t i = n_; i-- > 0;) {
      double best = kInf;
      for (int k = 1; k <= static_cast<int>(n_); ++k) best = std::min(best, cost_(i, k) + priced(k));
      dual_suffix_[i] = dual_suffix_[i + 1] + best;
      magnitude += std::abs(best) + std::abs(priced(static_cast<int>(n_)));
    }
    dual_ = dual_suffix_[0] - price_offset_;
    dual_tol_ = 1e-11 * (1.0 + magnitude);
  }
  struct State {
    std::int64_t sum;
    std::int64_t sq;
    double cost;
    std::int32_t parent;
    std::int32_t rank;
  };

  const CostTable& cost_;
  std::size_t n_;
  bool track_sq_;
  bool convex_;
  std::int64_t sum_lo_, sum_hi_, sq_lo_, sq_hi_;
  std::vector<std::vector<Candidate>> candidates_;
  std::vector<double> base_;
  std::vector<std::int64_t> start_sum_, start_sq_;
  std::vector<double> min_step_, up_rate_, down_rate_;
  double lambda_ = 0.0, nu_ = 0.0, price_offset_ = 0.0, dual_ = 0.0, dual_tol_ = 0.0;
  std::vector<double> dual_suffix_;
};

// Optimal permutation: objects sorted by score take positions sorted by theta.
// Every permutation lies in every rank space.
std::vector<int> sorted_permutation(std::span<const double> scores,
                                    std::span<const double> theta) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> objects(n), positions(n);
  std::iota(objects.begin(), objects.end(), 0);
  std::iota(positions.begin(), positions.end(), 0);
  std::stable_sort(objects.begin(), objects.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::stable_sort(positions.begin(), positions.end(),
                   [&](std::size_t a, std::size_t b) { return theta[a] < theta[b]; });
  std::vector<int> r(n);
  for (std::size_t j = 0; j < n; ++j) r[objects[j]] = static_cast<int>(positions[j] + 1);
  return r;
}

}  // namespace

double feature_match_objective(std::span<const double> scores, std::span<const double> theta,
                               const RankVector& r) {
  if (scores.size() != r.size() || theta.size() != r.size()) {
    throw InputError("feature_match_objective: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = scores[i] - theta[static_cast<std::size_t>(r[i] - 1)];
    total += d * d;
  }
  return total;
}

RankVector feature_match(std::span<const double> scores, std::span<const double> theta,
                         const RankSpace& space) {
  check_inputs(scores, theta, space);
  const std::size_t n = scores.size();
  const CostTable cost(scores, theta);

  std::vector<int> start(n);
  for (std::size_t i = 0; i < n; ++i) start[i] = cost.argmin(i);
  RankVector unconstrained(start);
  if (space_contains(space, unconstrained)) return unconstrained;

  bool convex = true;
  for (std::size_t i = 0; i < n && convex; ++i) convex = cost.convex(i);
  if (convex && !space.has_square_budget()) {
    return RankVector(greedy_sum_repair(cost, std::move(start), space));
  }

  const RepairSearch search(cost, start, space, convex);
  const RankVector fallback(sorted_permutation(scores, theta));
  const double ceiling_max = feature_match_objective(scores, theta, fallback);
  const double floor = std::max(search.lower_bound(0, 0, 0, 0.0), search.dual_bound());
  double gap = 1e-9 * (1.0 + std::abs(floor));
  for (;;) {
    const double ceiling = std::min(floor + gap, ceiling_max);
    if (auto r = search.solve(ceiling)) return RankVector(std::move(*r));
    if (ceiling >= ceiling_max) {
      throw std::logic_error("feature matching lost a feasible assignment");
    }
    gap *= 8.0;
  }
}

RankVector feature_match_exhaustive(std::span<const double> scores,
                                    std::span<const double> theta, const RankSpace& space,
                                    std::size_t n_max) {
  check_inputs(scores, theta, space);
  if (scores.size() > n_max) {
    throw RefusedError("exhaustive feature matching refuses n = " +
                       std::to_string(scores.size()) + " > " + std::to_string(n_max));
  }
  std::optional<RankVector> best;
  double best_cost = kInf;
  for_each_rank_vector(scores.size(), [&](const RankVector& r) {
    if (!space_contains(space, r)) return;
    const double c = feature_match_objective(scores, theta, r);
    if (c < best_cost) {
      best_cost = c;
      best = r;
    }
  });
  if (!best) throw std::logic_error("rank space is empty");
  return *best;
}

}  // namespace rankphase
