#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "meshset.hpp"
#include "parallel.hpp"

namespace twoplane {

struct SearchConfig {
  std::size_t samples = 1024;  // per set, split evenly between the two sheets of P_alpha + q
  unsigned workers = 0;
};

// d^alpha_{center,scale}(E, P_alpha + q) as a function of the translation.
// q = center + A u + B v with u in sheet-1 coordinates and v in sheet-2
// coordinates. Sheet 1 of P_alpha + q only sees v and sheet 2 only sees u, so
// the expensive side (plane samples to E) is cached per sheet.
template <PointSetQuery S>
class TranslationObjective {
public:
  TranslationObjective(const S& e, const PlanePair& pair, const Vec4& center, double scale,
                       const SearchConfig& cfg = {})
      : e_(e), pair_(pair), center_(center), scale_(scale), cfg_(cfg),
        window_(BiCylinder{pair, center, scale}) {
    if (!(scale > 0)) throw DomainError("TranslationObjective: scale must be positive");
    std::vector<Vec4> ys;
    e.sample(window_, cfg.samples, ys);
    for (int i = 0; i < 2; ++i) {
      const auto& n = pair.normals(i);
      for (const auto& y : ys) {
        Vec4 r = y - pair.sheet(i).offset - center;
        normal_[i].push_back(Vec2(n[0].dot(r), n[1].dot(r)));
      }
    }
  }

  const Vec4& center() const { return center_; }
  double scale() const { return scale_; }
  std::size_t set_samples() const { return normal_[0].size(); }

  Vec4 translation(const Vec2& u, const Vec2& v) const {
    const auto& a = pair_.p1;
    const auto& b = pair_.p2;
    return center_ + u.x() * a.b1 + u.y() * a.b2 + v.x() * b.b1 + v.y() * b.b2;
  }

  double operator()(const Vec2& u, const Vec2& v) const { return grid({u}, {v}).front(); }

  // values[iu * vs.size() + iv]
  std::vector<double> grid(const std::vector<Vec2>& us, const std::vector<Vec2>& vs) const {
    const std::size_t m = normal_[0].size();
    // distances from E samples to the two shifted sheets
    auto set_side = [&](int i, const std::vector<Vec2>& shifts) {
      const auto& n = pair_.normals(i);
      const Plane2& other = pair_.sheet(1 - i);
      std::vector<std::vector<double>> out(shifts.size(), std::vector<double>(m));
      for (std::size_t k = 0; k < shifts.size(); ++k) {
        Vec4 t = shifts[k].x() * other.b1 + shifts[k].y() * other.b2;
        Vec2 w(n[0].dot(t), n[1].dot(t));
        for (std::size_t j = 0; j < m; ++j) out[k][j] = (normal_[i][j] - w).norm();
      }
      return out;
    };
    auto t1 = set_side(0, vs);
    auto t2 = set_side(1, us);
    std::vector<double> f1(vs.size()), f2(us.size());
    parallel_for(vs.size() + us.size(), cfg_.workers, [&](std::size_t k) {
      if (k < vs.size())
        f1[k] = plane_side(0, translation(Vec2::Zero(), vs[k]));
      else
        f2[k - vs.size()] = plane_side(1, translation(us[k - vs.size()], Vec2::Zero()));
    });
    std::vector<double> out(us.size() * vs.size());
    parallel_for(us.size(), cfg_.workers, [&](std::size_t iu) {
      for (std::size_t iv = 0; iv < vs.size(); ++iv) {
        double worst = std::max(f1[iv], f2[iu]);
        const auto& a = t1[iv];
        const auto& b = t2[iu];
        for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::min(a[j], b[j]));
        out[iu * vs.size() + iv] = worst / scale_;
      }
    });
    return out;
  }

private:
  double plane_side(int i, const Vec4& q) const {
    std::vector<Vec4> zs;
    detail::sample_plane(pair_.sheet(i).translated(q), window_, (cfg_.samples + 1) / 2, zs);
    double worst = 0.0;
    for (const auto& z : zs) worst = std::max(worst, static_cast<double>(e_.distance(z)));
    return worst;
  }

  const S& e_;
  PlanePair pair_;
  Vec4 center_;
  double scale_;
  SearchConfig cfg_;
  Region window_;
  std::array<std::vector<Vec2>, 2> normal_;
};

struct TranslationFit {
  Vec4 q = Vec4::Zero();
  double d = 0.0;
  Vec2 u = Vec2::Zero(), v = Vec2::Zero();  // offsets from the search center
  double cell = 0.0;                         // final lattice spacing
  // d moves by at most max(|du|, |dv|) / scale, so this bounds the gap to the
  // best point of the final cell
  double local_gap = 0.0;
};

namespace detail {

inline std::vector<Vec2> lattice2(const Vec2& c, double step, int half) {
  std::vector<Vec2> out;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j) out.push_back(c + step * Vec2(i, j));
  return out;
}

} // namespace detail

// Coarse 9^4 lattice over the box of radius scale/2, then three rounds that
// split the winning cell in three along each axis.
template <PointSetQuery S>
TranslationFit best_translation(const TranslationObjective<S>& obj) {
  const double s = obj.scale();
  double step = s / 8;
  Vec2 bu = Vec2::Zero(), bv = Vec2::Zero();
  double best = std::numeric_limits<double>::infinity();
  auto round = [&](int half) {
    auto us = detail::lattice2(bu, step, half);
    auto vs = detail::lattice2(bv, step, half);
    auto vals = obj.grid(us, vs);
    // centre first so that ties keep the current point
    std::size_t pick = (us.size() / 2) * vs.size() + vs.size() / 2;
    for (std::size_t k = 0; k < vals.size(); ++k)
      if (vals[k] < vals[pick]) pick = k;
    best = vals[pick];
    bu = us[pick / vs.size()];
    bv = vs[pick % vs.size()];
  };
  round(4);
  for (int r = 0; r < 3; ++r) {
    step /= 3;
    round(1);
  }
  TranslationFit fit;
  fit.u = bu;
  fit.v = bv;
  fit.q = obj.translation(bu, bv);
  fit.d = best;
  fit.cell = step;
  fit.local_gap = step / std::sqrt(2.0) / s;
  return fit;
}

template <PointSetQuery S>
TranslationFit best_translation(const S& e, const PlanePair& pair, const Vec4& center, double scale,
                                const SearchConfig& cfg = {}) {
  return best_translation(TranslationObjective<S>(e, pair, center, scale, cfg));
}

struct ProcessConfig {
  double eps = 1e-2;
  double eps0 = 1e-2;
  double floor = 0.0;  // must be set; see default_floor
  double scale = 1.0;  // s_n = scale * 2^-n
  SearchConfig search;

  void validate() const {
    if (!(eps > 0)) throw DomainError("eps process: eps must be positive");
    if (!(eps <= eps0)) throw DomainError("eps process: eps exceeds eps0");
    if (!(floor > 0)) throw DomainError("eps process: floor must be positive");
    if (!(scale > 0)) throw DomainError("eps process: scale must be positive");
    if (search.samples < 16) throw DomainError("eps process: too few samples");
  }
};

// Below four edge lengths the distance estimates are mostly discretisation.
inline double default_floor(const TriMesh4& m) { return 4.0 * m.edge_length_min(); }

struct ProcessStep {
  int n = 0;
  double s = 0.0;
  Vec4 q = Vec4::Zero();    // q_n
  double d = 0.0;           // best distance found in D(q_n, s_n)
  Vec4 fit = Vec4::Zero();  // its translation, q_{n+1} unless the run stopped here
  double local_gap = 0.0;
};

struct Transcript {
  double eps = 0.0;
  double scale = 1.0;
  double floor = 0.0;
  double hypothesis = 0.0;  // d_{0,scale}(E, P_alpha)
  std::vector<ProcessStep> steps;
  bool stopped = false;
  Vec4 o_e = Vec4::Zero();
  double r_e = 0.0;
  // at the stopped scale: E against P_alpha + o_E in D(o_E, 2 r_E (1 - 12 eps))
  double closeness = 0.0;
  double closeness_bound = 0.0;
  bool closeness_holds = false;
  double origin_offset = 0.0;  // |o_E|, against 12 eps scale
  bool origin_holds = false;
};

template <PointSetQuery S>
Transcript run_eps_process(const S& e, const PlanePair& pair, const ProcessConfig& cfg) {
  cfg.validate();
  const double eps = cfg.eps;
  Transcript t;
  t.eps = eps;
  t.scale = cfg.scale;
  t.floor = cfg.floor;
  const std::size_t n = cfg.search.samples;
  t.hypothesis =
      relative_distance(e, PlaneUnion::of(pair), BiCylinder{pair, Vec4::Zero(), cfg.scale}, cfg.scale, n).value;
  if (!(t.hypothesis < eps / 10))
    throw DomainError("eps process: hypothesis fails, d = " + std::to_string(t.hypothesis) + " is not below eps/10");

  // step 0 is the hypothesis itself with q_0 = q_1 = 0
  ProcessStep first;
  first.s = cfg.scale;
  first.d = t.hypothesis;
  t.steps.push_back(first);

  Vec4 q = Vec4::Zero();
  double s = cfg.scale / 2;
  for (int k = 1; s >= cfg.floor; ++k, s /= 2) {
    auto fit = best_translation(e, pair, q, s, cfg.search);
    t.steps.push_back(ProcessStep{k, s, q, fit.d, fit.q, fit.local_gap});
    if (fit.d > eps) {
      t.stopped = true;
      t.o_e = q;
      t.r_e = s;
      break;
    }
    q = fit.q;
  }
  if (!t.stopped) return t;

  double rho = 2 * t.r_e * (1 - 12 * eps);
  t.closeness = relative_distance(e, PlaneUnion::of(pair, t.o_e), BiCylinder{pair, t.o_e, rho}, rho, n).value;
  t.closeness_bound = eps / (1 - 12 * eps);
  t.closeness_holds = t.closeness <= t.closeness_bound;
  t.origin_offset = t.o_e.norm();
  t.origin_holds = t.origin_offset <= 12 * eps * cfg.scale;
  return t;
}

struct TranscriptInvariants {
  double step_ratio = 0.0;  // max d(q_i, q_{i+1}) / (12 s_i eps) over non-stop steps
  double pair_ratio = 0.0;  // max d(q_i, q_j) / (24 eps s_min(i,j))
  bool halving = true;
  bool holds() const { return halving && step_ratio <= 1.0 && pair_ratio <= 1.0; }
};

inline TranscriptInvariants check_invariants(const Transcript& t) {
  TranscriptInvariants out;
  const auto& st = t.steps;
  std::vector<Vec4> qs;
  std::vector<double> ss;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (i > 0 && std::abs(st[i].s - st[i - 1].s / 2) > 1e-15 * st[i - 1].s) out.halving = false;
    qs.push_back(st[i].q);
    ss.push_back(st[i].s);
  }
  const std::size_t moves = t.stopped ? st.size() - 1 : st.size();
  for (std::size_t i = 0; i < moves; ++i) {
    double bound = 12 * st[i].s * t.eps;
    out.step_ratio = std::max(out.step_ratio, (st[i].fit - st[i].q).norm() / bound);
  }
  if (!t.stopped && !st.empty()) {
    qs.push_back(st.back().fit);
    ss.push_back(st.back().s / 2);
  }
  for (std::size_t i = 0; i < qs.size(); ++i)
    for (std::size_t j = i + 1; j < qs.size(); ++j) {
      double bound = 24 * t.eps * std::max(ss[i], ss[j]);
      out.pair_ratio = std::max(out.pair_ratio, (qs[i] - qs[j]).norm() / bound);
    }
  return out;
}

inline nlohmann::json transcript_to_json(const Transcript& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"n", s.n}, {"s_n", s.s}, {"q_n", s.q}, {"d_n", s.d}, {"fit", s.fit}, {"local_gap", s.local_gap}});
  auto inv = check_invariants(t);
  nlohmann::json j{{"eps", t.eps},
                   {"scale", t.scale},
                   {"floor", t.floor},
                   {"hypothesis", t.hypothesis},
                   {"steps", steps},
                   {"invariants",
                    {{"step_ratio", inv.step_ratio}, {"pair_ratio", inv.pair_ratio}, {"holds", inv.holds()}}}};
  if (t.stopped) {
    j["verdict"] = {{"kind", "stopped"},
                    {"o_e", t.o_e},
                    {"r_e", t.r_e},
                    {"closeness", t.closeness},
                    {"closeness_bound", t.closeness_bound},
                    {"closeness_holds", t.closeness_holds},
                    {"origin_offset", t.origin_offset},
                    {"origin_holds", t.origin_holds}};
  } else {
    j["verdict"] = {{"kind", "exhausted"}, {"floor", t.floor}};
  }
  return j;
}

} // namespace twoplane
