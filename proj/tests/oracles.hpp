#pragma once

// Brute-force reference implementations. Everything here is written as plain
// loops over std containers and shares no code with the library beyond the
// data types, so agreement is meaningful.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "cscpr/cscc.hpp"
#include "cscpr/point_cloud.hpp"
#include "cscpr/rng.hpp"
#include "cscpr/scc.hpp"

namespace oracle {

using cscpr::Matrix;
using cscpr::Vec3;

using Cell = std::tuple<long long, long long, long long>;

inline std::set<Cell> voxel_set(const std::vector<Vec3>& pts, const cscpr::Pose& pose, double vs) {
  std::set<Cell> cells;
  for (const auto& p : pts) {
    const Vec3 w = pose.rotation * p + pose.translation;
    cells.insert({static_cast<long long>(std::floor(w.x() / vs)),
                  static_cast<long long>(std::floor(w.y() / vs)),
                  static_cast<long long>(std::floor(w.z() / vs))});
  }
  return cells;
}

inline std::size_t shared(const std::set<Cell>& a, const std::set<Cell>& b) {
  std::size_t n = 0;
  for (const auto& c : a) n += b.count(c);
  return n;
}

inline double iou(const std::set<Cell>& a, const std::set<Cell>& b) {
  std::set<Cell> u = a;
  u.insert(b.begin(), b.end());
  return static_cast<double>(shared(a, b)) / static_cast<double>(u.size());
}

inline double coverage(const std::set<Cell>& q, const std::set<Cell>& d) {
  return static_cast<double>(shared(q, d)) / static_cast<double>(q.size());
}

inline double sq(const Vec3& a, const Vec3& b) { return (a - b).squaredNorm(); }

inline bool lex(const Vec3& a, const Vec3& b) {
  return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
}

// a beats b when it has the larger key, or an equal key and the smaller
// (position, index).
inline bool wins(double ka, double kb, const std::vector<Vec3>& p, std::size_t a, std::size_t b) {
  if (ka != kb) return ka > kb;
  if (lex(p[a], p[b])) return true;
  if (lex(p[b], p[a])) return false;
  return a < b;
}

// Greedy max-min selection recomputing every distance from scratch.
inline std::vector<std::size_t> fps(const std::vector<Vec3>& p, std::size_t m) {
  const std::size_t n = p.size();
  Vec3 c = Vec3::Zero();
  for (const auto& x : p) c += x;
  c /= static_cast<double>(n);
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (wins(sq(p[i], c), sq(p[first], c), p, i, first)) first = i;
  }
  std::vector<std::size_t> sel{first};
  std::vector<bool> taken(n, false);
  taken[first] = true;
  while (sel.size() < m) {
    std::size_t best = n;
    double best_d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double d = INFINITY;
      for (std::size_t s : sel) d = std::min(d, sq(p[i], p[s]));
      if (best == n || wins(d, best_d, p, i, best)) {
        best = i;
        best_d = d;
      }
    }
    sel.push_back(best);
    taken[best] = true;
  }
  return sel;
}

inline std::vector<std::size_t> knn_row(const Vec3& q, const std::vector<Vec3>& base,
                                        std::size_t k) {
  std::vector<std::size_t> idx(base.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double da = sq(base[a], q);
    const double db = sq(base[b], q);
    if (da != db) return da < db;
    return lex(base[a], base[b]);
  });
  idx.resize(k);
  return idx;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline std::vector<double> affine(const cscpr::LinearLayer& l, const std::vector<double>& x) {
  std::vector<double> y(l.out());
  for (std::size_t o = 0; o < l.out(); ++o) {
    double s = 0;
    for (std::size_t i = 0; i < l.in(); ++i) s += l.weight(o, i) * x[i];
    y[o] = s + l.bias[o];
  }
  return y;
}

inline std::vector<double> gnorm(const cscpr::GroupNormParams& g, const std::vector<double>& x) {
  const std::size_t size = x.size() / g.num_groups;
  std::vector<double> y(x.size());
  for (std::size_t grp = 0; grp < g.num_groups; ++grp) {
    double mean = 0;
    for (std::size_t c = 0; c < size; ++c) mean += x[grp * size + c];
    mean /= static_cast<double>(size);
    double var = 0;
    for (std::size_t c = 0; c < size; ++c) var += (x[grp * size + c] - mean) * (x[grp * size + c] - mean);
    var /= static_cast<double>(size);
    for (std::size_t c = 0; c < size; ++c) {
      const std::size_t ch = grp * size + c;
      y[ch] = g.gamma[ch] * (x[ch] - mean) / std::sqrt(var + g.epsilon) + g.shift[ch];
    }
  }
  return y;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline std::vector<double> row(const Matrix& m, std::size_t r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return v;
}

struct SCCResult {
  std::vector<std::vector<double>> out;
  std::vector<Vec3> positions;
  std::vector<std::vector<double>> src_centers;  // f_c^s before enhancement
  std::vector<std::vector<double>> enhanced;
  std::vector<std::vector<double>> sim;  // M x N
  std::vector<std::size_t> owner;
};

inline SCCResult scc(const cscpr::FeatureMatrix& x, const cscpr::SCCParams& p) {
  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lex(x.positions[a], x.positions[b])) return true;
    if (lex(x.positions[b], x.positions[a])) return false;
    const auto ra = row(x.values, a);
    const auto rb = row(x.values, b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::vector<Vec3> pos(n);
  std::vector<std::vector<double>> ref(n), src(n);
  for (std::size_t r = 0; r < n; ++r) {
    pos[r] = x.positions[order[r]];
    const auto in = row(x.values, order[r]);
    ref[r] = gnorm(p.gn_r, affine(p.l_r, in));
    src[r] = gnorm(p.gn_s, affine(p.l_s, in));
  }

  const std::size_t m = p.num_centers;
  const std::size_t k = p.knn_k != 0 ? p.knn_k : std::min(n, 3 * std::max<std::size_t>(1, n / m));
  const auto centers = fps(pos, m);
  const std::size_t ds = ref[0].size();

  SCCResult res;
  std::vector<std::vector<double>> cref(m, std::vector<double>(ds, 0.0));
  res.src_centers.assign(m, std::vector<double>(ds, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    res.positions.push_back(pos[centers[i]]);
    auto members = knn_row(pos[centers[i]], pos, k);
    std::sort(members.begin(), members.end());
    for (std::size_t j : members) {
      for (std::size_t c = 0; c < ds; ++c) {
        cref[i][c] += ref[j][c];
        res.src_centers[i][c] += src[j][c];
      }
    }
    for (std::size_t c = 0; c < ds; ++c) {
      cref[i][c] /= static_cast<double>(k);
      res.src_centers[i][c] /= static_cast<double>(k);
    }
  }

  res.sim.assign(m, std::vector<double>(n));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) res.sim[i][j] = sigmoid(p.alpha * cosine(cref[i], ref[j]) + p.beta);
  }
  res.owner.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 1; i < m; ++i) {
      if (res.sim[i][j] > res.sim[res.owner[j]][j]) res.owner[j] = i;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> num = res.src_centers[i];
    double den = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (res.owner[j] != i) continue;
      for (std::size_t c = 0; c < ds; ++c) num[c] += res.sim[i][j] * src[j][c];
      den += res.sim[i][j];
    }
    for (auto& v : num) v /= den;
    res.enhanced.push_back(num);
    res.out.push_back(affine(p.l_c, num));
  }
  return res;
}

struct CSCCResult {
  double score = 0;
  std::vector<std::vector<double>> corr;
  std::vector<std::vector<bool>> kept;
  std::vector<double> fused;
};

inline CSCCResult cscc(const Matrix& q, const Matrix& d, const cscpr::CSCCParams& p) {
  const auto mq = static_cast<std::size_t>(q.rows());
  const auto md = static_cast<std::size_t>(d.rows());
  CSCCResult r;
  r.corr.assign(mq, std::vector<double>(md));
  std::vector<std::tuple<double, std::size_t, std::size_t>> entries;
  for (std::size_t i = 0; i < mq; ++i) {
    for (std::size_t j = 0; j < md; ++j) {
      r.corr[i][j] = sigmoid(p.alpha * cosine(row(q, i), row(d, j)) + p.beta);
      entries.emplace_back(-r.corr[i][j], i, j);
    }
  }
  std::sort(entries.begin(), entries.end());
  r.kept.assign(mq, std::vector<bool>(md, false));
  for (std::size_t e = 0; e < std::min(p.top_k, entries.size()); ++e) {
    r.kept[std::get<1>(entries[e])][std::get<2>(entries[e])] = true;
  }

  const std::size_t hidden = p.l_c.out();
  std::vector<double> total(hidden, 0.0);
  double row_mass = 0;
  for (std::size_t j = 0; j < md; ++j) {
    std::vector<double> acc(hidden, 0.0);
    double mass = 0;
    for (std::size_t i = 0; i < mq; ++i) {
      if (!r.kept[i][j]) continue;
      std::vector<double> cat = row(q, i);
      const auto dj = row(d, j);
      cat.insert(cat.end(), dj.begin(), dj.end());
      for (auto& v : cat) v *= r.corr[i][j];
      const auto h = affine(p.l_c, cat);
      for (std::size_t c = 0; c < hidden; ++c) acc[c] += h[c];
      mass += r.corr[i][j];
      row_mass += r.corr[i][j];
    }
    for (std::size_t c = 0; c < hidden; ++c) total[c] += acc[c] / (1.0 + mass);
  }
  row_mass /= static_cast<double>(mq);
  r.fused.resize(hidden);
  for (std::size_t c = 0; c < hidden; ++c) r.fused[c] = total[c] / (1.0 + row_mass);
  r.score = sigmoid(affine(p.l_f, r.fused)[0]);
  return r;
}

// Every vertex is in the set or adjacent to a member.
inline bool dominates(const std::vector<std::vector<std::size_t>>& adj,
                      const std::vector<std::size_t>& set) {
  std::vector<bool> covered(adj.size(), false);
  for (std::size_t v : set) {
    covered[v] = true;
    for (std::size_t u : adj[v]) covered[u] = true;
  }
  return std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
}

// Smallest dominating set size by subset enumeration (n <= ~16).
inline std::size_t min_dominating_size(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::size_t best = n;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits >= best) continue;
    std::vector<std::size_t> set;
    for (std::size_t v = 0; v < n; ++v) {
      if (mask & (1u << v)) set.push_back(v);
    }
    if (dominates(adj, set)) best = bits;
  }
  return best;
}

// Relative max-norm difference, scaled by the reference magnitude.
inline double rel_err(const std::vector<double>& got, const std::vector<double>& want) {
  double diff = 0, mag = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - want[i]));
    mag = std::max(mag, std::abs(want[i]));
  }
  return mag == 0 ? diff : diff / mag;
}

// Random instances shared by unit and acceptance tests.
inline cscpr::FeatureMatrix random_features(cscpr::Rng& rng, std::size_t n, std::size_t dim) {
  cscpr::FeatureMatrix f;
  f.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  f.positions.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dim; ++c) f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.normal();
    f.positions[r] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  return f;
}

inline cscpr::SCCParams random_scc(cscpr::Rng& rng, std::size_t in, std::size_t ds, std::size_t dc,
                                   std::size_t centers) {
  auto p = cscpr::SCCParams::init(in, ds, dc, centers, 2, rng.next());
  for (auto* g : {&p.gn_r, &p.gn_s}) {
    for (Eigen::Index c = 0; c < g->gamma.size(); ++c) {
      g->gamma[c] = rng.uniform(0.5, 1.5);
      g->shift[c] = rng.uniform(-0.5, 0.5);
    }
  }
  p.alpha = rng.uniform(0.5, 4.0);
  p.beta = rng.uniform(-1.0, 1.0);
  return p;
}

inline cscpr::CenterFeatures random_centers(cscpr::Rng& rng, std::size_t m, std::size_t dim) {
  cscpr::CenterFeatures c;
  c.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < c.values.size(); ++i) c.values.data()[i] = rng.normal();
  c.positions.assign(m, Vec3::Zero());
  c.source_rows = m;
  return c;
}

inline cscpr::CSCCParams random_cscc(cscpr::Rng& rng, std::size_t dc, std::size_t hidden,
                                     std::size_t top_k) {
  auto p = cscpr::CSCCParams::init(dc, hidden, top_k, rng.next());
  p.alpha = rng.uniform(0.5, 4.0);
  p.beta = rng.uniform(-1.0, 1.0);
  return p;
}

inline std::vector<Vec3> random_positions(cscpr::Rng& rng, std::size_t n, double extent) {
  std::vector<Vec3> p(n);
  for (auto& x : p) x = {rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent)};
  return p;
}

// Small integer lattice points: exact distances, so ties are common.
inline std::vector<Vec3> lattice_positions(cscpr::Rng& rng, std::size_t n, int side) {
  std::vector<Vec3> p(n);
  for (auto& x : p) {
    x = {static_cast<double>(rng.below(static_cast<std::uint64_t>(side))),
         static_cast<double>(rng.below(static_cast<std::uint64_t>(side))),
         static_cast<double>(rng.below(static_cast<std::uint64_t>(side)))};
  }
  return p;
}

inline cscpr::Pose random_pose(cscpr::Rng& rng, double max_t) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
  cscpr::Pose pose;
  pose.rotation = Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), axis.normalized()).toRotationMatrix();
  pose.translation = {rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t)};
  return pose;
}

}  // namespace oracle
