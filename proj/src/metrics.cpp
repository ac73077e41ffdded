#include "wrecon/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wrecon/io_util.hpp"

namespace wrecon {
namespace {

struct Plane {
  std::size_t h = 0, w = 0;
  const float* data = nullptr;
};

Plane as_plane(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1), t.raw()};
  if (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1) return {t.dim(2), t.dim(3), t.raw()};
  throw ShapeError(std::string(what) + ": expected an [H,W] image, got " + to_string(t.shape()));
}

void require_pair(const Tensor& a, const Tensor& b, const char* what) {
  const Plane pa = as_plane(a, what), pb = as_plane(b, what);
  if (pa.h != pb.h || pa.w != pb.w) {
    throw ShapeError(std::string(what) + ": image sizes differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

std::vector<double> gaussian_1d(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable 'valid' filtering of a double plane.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t ks = k.size(), oh = h - ks + 1, ow = w - ks + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < ks; ++i) s += k[i] * img[r * w + c + i];
      tmp[r * ow + c] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < ks; ++i) s += k[i] * tmp[(r + i) * ow + c];
      out[r * ow + c] = s;
    }
  }
  return out;
}

// Half-sample symmetric extension: -1 -> 0, n -> n-1.
long reflect(long i, long n) {
  const long period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> log_filter(const Plane& p, const std::vector<double>& k, std::size_t ks) {
  const long r = static_cast<long>(ks / 2);
  const long h = static_cast<long>(p.h), w = static_cast<long>(p.w);
  std::vector<double> out(p.h * p.w, 0.0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double s = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        const float* row = p.data + reflect(y + dy, h) * w;
        const double* krow = k.data() + (dy + r) * static_cast<long>(ks);
        for (long dx = -r; dx <= r; ++dx) s += krow[dx + r] * row[reflect(x + dx, w)];
      }
      out[y * w + x] = s;
    }
  }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

double parse_number(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError("report csv: bad number '" + s + "'");
  return v;
}

}  // namespace

double nmse(const Tensor& pred, const Tensor& target) {
  require_pair(pred, target, "nmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = static_cast<double>(target[i]) - pred[i];
    num += d * d;
    den += static_cast<double>(target[i]) * target[i];
  }
  if (den == 0.0) throw std::invalid_argument("nmse: target has zero norm");
  return num / den;
}

double psnr(const Tensor& pred, const Tensor& target, double data_range) {
  require_pair(pred, target, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = static_cast<double>(target[i]) - pred[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(target.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Tensor& pred, const Tensor& target, double data_range) {
  require_pair(pred, target, "ssim");
  const Plane p = as_plane(pred, "ssim"), t = as_plane(target, "ssim");
  if (p.h < kSsimWindow || p.w < kSsimWindow) {
    throw ShapeError("ssim: image smaller than the " + std::to_string(kSsimWindow) + "x" +
                     std::to_string(kSsimWindow) + " window");
  }
  const std::size_t n = p.h * p.w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = p.data[i];
    y[i] = t.data[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto g = gaussian_1d(kSsimWindow, kSsimSigma);
  const auto mx = filter_valid(x, p.h, p.w, g), my = filter_valid(y, p.h, p.w, g);
  const auto mxx = filter_valid(xx, p.h, p.w, g), myy = filter_valid(yy, p.h, p.w, g);
  const auto mxy = filter_valid(xy, p.h, p.w, g);
  const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
  const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

std::vector<double> log_kernel(std::size_t size, double sigma) {
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  const double s2 = sigma * sigma;
  std::vector<double> g(size * size);
  double gsum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double y = static_cast<double>(i) - c, x = static_cast<double>(j) - c;
      g[i * size + j] = std::exp(-(x * x + y * y) / (2.0 * s2));
      gsum += g[i * size + j];
    }
  }
  std::vector<double> k(size * size);
  double ksum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double y = static_cast<double>(i) - c, x = static_cast<double>(j) - c;
      k[i * size + j] = g[i * size + j] / gsum * (x * x + y * y - 2.0 * s2) / (s2 * s2);
      ksum += k[i * size + j];
    }
  }
  const double mean = ksum / static_cast<double>(k.size());
  for (auto& v : k) v -= mean;
  return k;
}

double hfen(const Tensor& pred, const Tensor& target) {
  require_pair(pred, target, "hfen");
  static const std::vector<double> kernel = log_kernel();
  const auto lp = log_filter(as_plane(pred, "hfen"), kernel, kHfenKernel);
  const auto lt = log_filter(as_plane(target, "hfen"), kernel, kHfenKernel);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    num += (lt[i] - lp[i]) * (lt[i] - lp[i]);
    den += lt[i] * lt[i];
  }
  if (den == 0.0) throw std::invalid_argument("hfen: LoG of target has zero norm");
  return std::sqrt(num / den);
}

double default_data_range(const Tensor& target) {
  float m = -std::numeric_limits<float>::infinity();
  for (float v : target.data()) m = std::max(m, v);
  return m;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples must have equal length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (diff != 0.0) d.push_back(diff);
  }
  WilcoxonResult res;
  res.n = d.size();
  if (d.empty()) return res;  // p = 1
  if (d.size() < 6) {
    throw std::invalid_argument("wilcoxon: need at least 6 nonzero differences, got " + std::to_string(d.size()));
  }

  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const double ai = std::abs(d[i]), aj = std::abs(d[j]);
    return ai != aj ? ai < aj : i < j;
  });
  // Doubled midranks are integers: a tie group at 1-based positions i..j
  // gets 2*rank = i + j.
  std::vector<std::size_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = (i + 1) + (j + 1);
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  std::size_t w2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w2 += rank2[i];
  }
  res.statistic = static_cast<double>(w2) / 2.0;

  const double nd = static_cast<double>(n);
  if (n < 20) {
    res.exact = true;
    // Null distribution of the doubled statistic by counting sign assignments.
    const std::size_t total2 = n * (n + 1);
    std::vector<double> counts(total2 + 1, 0.0);
    counts[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = total2; s + 1 > rank2[i]; --s) counts[s] += counts[s - rank2[i]];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s <= total2; ++s) {
      if (s <= w2) lower += counts[s];
      if (s >= w2) upper += counts[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
  } else {
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    double dev = res.statistic - mean;
    const double corr = std::min(0.5, std::abs(dev));
    dev = dev > 0 ? dev - corr : dev + corr;
    const double z = var > 0.0 ? dev / std::sqrt(var) : 0.0;
    res.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  }
  res.significant = res.p_value < alpha;
  return res;
}

ImageMetrics compute_metrics(std::string id, const Tensor& pred, const Tensor& target) {
  const double range = default_data_range(target);
  ImageMetrics m;
  m.id = std::move(id);
  m.nmse = nmse(pred, target);
  m.psnr = psnr(pred, target, range);
  m.ssim = ssim(pred, target, range);
  m.hfen = hfen(pred, target);
  return m;
}

MetricStats mean_std(std::span<const double> values) {
  MetricStats s;
  if (values.empty()) return s;
  // Sorting first makes the sums independent of the input order.
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

MetricReport MetricReport::from_images(std::vector<ImageMetrics> images) {
  MetricReport r;
  r.images = std::move(images);
  std::vector<double> a, b, c, d;
  for (const auto& m : r.images) {
    a.push_back(m.nmse);
    b.push_back(m.psnr);
    c.push_back(m.ssim);
    d.push_back(m.hfen);
  }
  r.nmse = mean_std(a);
  r.psnr = mean_std(b);
  r.ssim = mean_std(c);
  r.hfen = mean_std(d);
  return r;
}

std::string format_report_csv(const MetricReport& r) {
  std::ostringstream os;
  os << "id,nmse,psnr,ssim,hfen\n";
  for (const auto& m : r.images) {
    os << m.id << ',' << fmt(m.nmse) << ',' << fmt(m.psnr) << ',' << fmt(m.ssim) << ',' << fmt(m.hfen) << '\n';
  }
  os << "mean," << fmt(r.nmse.mean) << ',' << fmt(r.psnr.mean) << ',' << fmt(r.ssim.mean) << ','
     << fmt(r.hfen.mean) << '\n';
  os << "std," << fmt(r.nmse.std) << ',' << fmt(r.psnr.std) << ',' << fmt(r.ssim.std) << ','
     << fmt(r.hfen.std) << '\n';
  return os.str();
}

MetricReport parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "id,nmse,psnr,ssim,hfen") throw FormatError("report csv: bad header");
  MetricReport r;
  bool have_mean = false, have_std = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw FormatError("report csv: expected 5 columns in '" + line + "'");
    const double v1 = parse_number(f[1]), v2 = parse_number(f[2]), v3 = parse_number(f[3]),
                 v4 = parse_number(f[4]);
    if (f[0] == "mean") {
      r.nmse.mean = v1, r.psnr.mean = v2, r.ssim.mean = v3, r.hfen.mean = v4;
      have_mean = true;
    } else if (f[0] == "std") {
      r.nmse.std = v1, r.psnr.std = v2, r.ssim.std = v3, r.hfen.std = v4;
      have_std = true;
    } else {
      if (have_mean || have_std) throw FormatError("report csv: image row after aggregate rows");
      r.images.push_back({f[0], v1, v2, v3, v4});
    }
  }
  if (!have_mean || !have_std) throw FormatError("report csv: missing aggregate rows");
  return r;
}

void save_report_csv(const MetricReport& r, const std::filesystem::path& path) {
  write_file_atomic(path, format_report_csv(r));
}

MetricReport load_report_csv(const std::filesystem::path& path) { return parse_report_csv(read_file(path)); }

}  // namespace wrecon
