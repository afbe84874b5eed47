#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "mfm/bench.hpp"
#include "mfm/error.hpp"

namespace mfm {
namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

void require_comparable(const VideoTensor& x, const VideoTensor& y, const char* what) {
  if (!x.same_shape(y)) throw ShapeError(std::string(what) + ": inputs differ in shape");
  if (x.size() == 0) throw ShapeError(std::string(what) + ": empty inputs");
}

// Separable Gaussian filter over one H x W plane; weights are renormalized over the
// part of the window that falls inside the image.
class WindowFilter {
 public:
  WindowFilter(int height, int width, int radius, double sigma) : h_(height), w_(width), radius_(radius) {
    kernel_.resize(2 * radius + 1);
    for (int d = -radius; d <= radius; ++d) kernel_[d + radius] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    row_norm_ = norms(width);
    col_norm_ = norms(height);
  }

  std::vector<double> apply(const std::vector<double>& plane) const {
    std::vector<double> tmp(plane.size(), 0.0), out(plane.size(), 0.0);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int d = -radius_; d <= radius_; ++d) {
          const int xx = x + d;
          if (xx >= 0 && xx < w_) s += kernel_[d + radius_] * plane[y * w_ + xx];
        }
        tmp[y * w_ + x] = s / row_norm_[x];
      }
    }
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int d = -radius_; d <= radius_; ++d) {
          const int yy = y + d;
          if (yy >= 0 && yy < h_) s += kernel_[d + radius_] * tmp[yy * w_ + x];
        }
        out[y * w_ + x] = s / col_norm_[y];
      }
    }
    return out;
  }

 private:
  std::vector<double> norms(int n) const {
    std::vector<double> r(n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int d = -radius_; d <= radius_; ++d) {
        if (i + d >= 0 && i + d < n) r[i] += kernel_[d + radius_];
      }
    }
    return r;
  }

  int h_, w_, radius_;
  std::vector<double> kernel_, row_norm_, col_norm_;
};

std::string real_text(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

double blur_score(const VideoTensor& clip, int t) {
  if (clip.channels != 3 && clip.channels != 1) throw ShapeError("blur_score expects RGB or single-channel frames");
  if (t < 0 || t >= clip.frames) throw ShapeError("blur_score: frame index out of range");
  const int H = clip.height, W = clip.width;
  std::vector<double> y(static_cast<std::size_t>(H) * W);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double l = clip.channels == 1 ? clip.at(t, r, c, 0)
                                          : kLumaR * clip.at(t, r, c, 0) + kLumaG * clip.at(t, r, c, 1) +
                                                kLumaB * clip.at(t, r, c, 2);
      y[r * W + c] = (l + 1.0) * 0.5 * 255.0;
    }
  }
  std::vector<double> lap(y.size());
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      lap[r * W + c] = y[reflect101(r - 1, H) * W + c] + y[reflect101(r + 1, H) * W + c] +
                       y[r * W + reflect101(c - 1, W)] + y[r * W + reflect101(c + 1, W)] - 4.0 * y[r * W + c];
    }
  }
  double mean = 0.0;
  for (double v : lap) mean += v;
  mean /= static_cast<double>(lap.size());
  double var = 0.0;
  for (double v : lap) var += (v - mean) * (v - mean);
  return var / static_cast<double>(lap.size());
}

double psnr(const VideoTensor& x, const VideoTensor& y) {
  require_comparable(x, y, "psnr");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = (x.data[i] - y.data[i]) * 0.5;
    s += d * d;
  }
  const double mse = s / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const VideoTensor& x, const VideoTensor& y) {
  require_comparable(x, y, "ssim");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const int H = x.height, W = x.width;
  const WindowFilter filter(H, W, 5, 1.5);
  const std::size_t n = static_cast<std::size_t>(H) * W;
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  double total = 0.0;
  for (int t = 0; t < x.frames; ++t) {
    for (int c = 0; c < x.channels; ++c) {
      for (int r = 0; r < H; ++r) {
        for (int q = 0; q < W; ++q) {
          const std::size_t i = static_cast<std::size_t>(r) * W + q;
          a[i] = (x.at(t, r, q, c) + 1.0) * 0.5;
          b[i] = (y.at(t, r, q, c) + 1.0) * 0.5;
          aa[i] = a[i] * a[i];
          bb[i] = b[i] * b[i];
          ab[i] = a[i] * b[i];
        }
      }
      const auto mu_a = filter.apply(a), mu_b = filter.apply(b);
      const auto e_aa = filter.apply(aa), e_bb = filter.apply(bb), e_ab = filter.apply(ab);
      double plane = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double va = e_aa[i] - mu_a[i] * mu_a[i];
        const double vb = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        plane += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
                 ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
      }
      total += plane / static_cast<double>(n);
    }
  }
  return total / (static_cast<double>(x.frames) * x.channels);
}

std::vector<BenchReport::Summary> BenchReport::summaries() const {
  std::map<std::size_t, Summary> by_task;
  std::map<std::size_t, int> finite;
  for (const ReportRow& r : rows) {
    Summary& s = by_task[task_index(r.task)];
    s.task = r.task;
    ++s.count;
    s.mean_ssim += r.ssim;
    if (std::isfinite(r.psnr)) {
      s.mean_psnr += r.psnr;
      ++finite[task_index(r.task)];
    }
  }
  std::vector<Summary> out;
  for (auto& [idx, s] : by_task) {
    s.mean_ssim /= s.count;
    const int f = finite[idx];
    s.mean_psnr = f > 0 ? s.mean_psnr / f : std::numeric_limits<double>::infinity();
    out.push_back(s);
  }
  return out;
}

std::string BenchReport::to_tsv() const {
  std::ostringstream out;
  out << "id\ttask\tpsnr_db\tssim\n";
  for (const ReportRow& r : rows) {
    out << r.id << '\t' << task_canonical(r.task) << '\t' << real_text(r.psnr) << '\t' << real_text(r.ssim) << '\n';
  }
  for (const Summary& s : summaries()) {
    out << "mean\t" << task_canonical(s.task) << '\t' << real_text(s.mean_psnr) << '\t' << real_text(s.mean_ssim)
        << '\n';
  }
  return out.str();
}

}  // namespace mfm
