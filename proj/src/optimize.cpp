#include "hjsing/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>

namespace hjsing {

namespace {

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveWithGradient& f, std::vector<double> x0,
                           double gtol, int max_iter, int memory) {
  const std::size_t n = x0.size();
  LbfgsResult r;
  r.x = std::move(x0);
  std::vector<double> g(n), g_new(n), d(n), x_new(n);
  r.f = f(r.x, g);
  r.grad_norm = std::sqrt(dotv(g, g));
  if (n == 0) {
    r.converged = true;
    return r;
  }
  std::deque<std::vector<double>> ss, ys;
  std::deque<double> rhos;
  int stalls = 0;
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    if (r.grad_norm < gtol) break;
    // Two-loop recursion.
    d = g;
    std::vector<double> alpha(ss.size());
    for (std::size_t i = ss.size(); i-- > 0;) {
      alpha[i] = rhos[i] * dotv(ss[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] -= alpha[i] * ys[i][k];
    }
    if (!ss.empty()) {
      const double gamma = dotv(ss.back(), ys.back()) / dotv(ys.back(), ys.back());
      for (double& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double beta = rhos[i] * dotv(ys[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] += (alpha[i] - beta) * ss[i][k];
    }
    for (double& v : d) v = -v;
    double slope = dotv(g, d);
    if (!(slope < 0.0)) {
      ss.clear();
      ys.clear();
      rhos.clear();
      for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
      slope = -r.grad_norm * r.grad_norm;
    }
    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < n; ++k) x_new[k] = r.x[k] + step * d[k];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= r.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Round-off floor: accept a non-increasing step if one exists.
      if (std::isfinite(f_new) && f_new <= r.f) {
        accepted = true;
      } else {
        break;
      }
    }
    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = x_new[k] - r.x[k];
      y[k] = g_new[k] - g[k];
    }
    const double sy = dotv(s, y);
    if (sy > 1e-300) {
      ss.push_back(std::move(s));
      ys.push_back(std::move(y));
      rhos.push_back(1.0 / sy);
      if (static_cast<int>(ss.size()) > memory) {
        ss.pop_front();
        ys.pop_front();
        rhos.pop_front();
      }
    }
    stalls = (r.f - f_new <= 1e-16 * std::abs(r.f)) ? stalls + 1 : 0;
    r.x.swap(x_new);
    g.swap(g_new);
    r.f = f_new;
    r.grad_norm = std::sqrt(dotv(g, g));
    if (stalls >= 8) break;
  }
  r.converged = r.grad_norm < gtol;
  return r;
}

NelderMeadResult nelder_mead_2d(const std::function<double(Vec2)>& f, Vec2 start,
                                double initial_step, double tol, int max_restarts) {
  NelderMeadResult best{start, f(start), 1};
  double step = initial_step;
  for (int restart = 0; restart <= max_restarts; ++restart) {
    std::array<Vec2, 3> s{best.x, best.x + Vec2{step, 0.0}, best.x + Vec2{0.0, step}};
    std::array<double, 3> fs{best.f, f(s[1]), f(s[2])};
    best.evaluations += 2;
    for (int it = 0; it < 4000; ++it) {
      std::array<int, 3> idx{0, 1, 2};
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
      const std::array<Vec2, 3> so{s[idx[0]], s[idx[1]], s[idx[2]]};
      const std::array<double, 3> fo{fs[idx[0]], fs[idx[1]], fs[idx[2]]};
      s = so;
      fs = fo;
      const double size = std::max(distance(s[0], s[1]), distance(s[0], s[2]));
      if (size < tol) break;
      const Vec2 c = 0.5 * (s[0] + s[1]);
      const Vec2 xr = c + (c - s[2]);
      const double fr = f(xr);
      ++best.evaluations;
      if (fr < fs[0]) {
        const Vec2 xe = c + 2.0 * (c - s[2]);
        const double fe = f(xe);
        ++best.evaluations;
        if (fe < fr) {
          s[2] = xe;
          fs[2] = fe;
        } else {
          s[2] = xr;
          fs[2] = fr;
        }
      } else if (fr < fs[1]) {
        s[2] = xr;
        fs[2] = fr;
      } else {
        const bool outside = fr < fs[2];
        const Vec2 xc = outside ? c + 0.5 * (xr - c) : c + 0.5 * (s[2] - c);
        const double fc = f(xc);
        ++best.evaluations;
        if (fc < (outside ? fr : fs[2])) {
          s[2] = xc;
          fs[2] = fc;
        } else {
          for (int k = 1; k < 3; ++k) {
            s[k] = s[0] + 0.5 * (s[k] - s[0]);
            fs[k] = f(s[k]);
          }
          best.evaluations += 2;
        }
      }
    }
    const int arg = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    const bool improved = fs[arg] < best.f;
    if (fs[arg] <= best.f) {
      best.x = s[arg];
      best.f = fs[arg];
    }
    if (!improved && restart > 0) break;
    step = std::max(step * 0.25, 10.0 * tol);
  }
  return best;
}

double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  const double a0 = a, b0 = b;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double m = 0.5 * (a + b);
  // Endpoints win when the minimum sits on the boundary.
  double best = m, fbest = f(m);
  for (double e : {a0, b0}) {
    const double fe = f(e);
    if (fe < fbest) {
      fbest = fe;
      best = e;
    }
  }
  return best;
}

}  // namespace hjsing
