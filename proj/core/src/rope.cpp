#include "mfm/rope.hpp"

#include <cmath>
#include <string>

#include "mfm/error.hpp"

namespace mfm {

std::array<int, 3> rope_axis_split(int head_dim) {
  if (head_dim <= 0 || head_dim % 16 != 0) {
    throw ValidationError("rotary head_dim must be a positive multiple of 16, got " +
                          std::to_string(head_dim));
  }
  return {head_dim / 4, 3 * head_dim / 8, 3 * head_dim / 8};
}

std::vector<GridPos> grid_positions(int t, int h, int w) {
  std::vector<GridPos> out;
  out.reserve(static_cast<std::size_t>(t) * h * w);
  for (int a = 0; a < t; ++a)
    for (int b = 0; b < h; ++b)
      for (int c = 0; c < w; ++c) out.push_back({a, b, c});
  return out;
}

double rope_angle(const GridPos& pos, int pair, int head_dim, double base) {
  const auto split = rope_axis_split(head_dim);
  int axis = 0;
  int local = pair;
  while (axis < 3 && local >= split[static_cast<std::size_t>(axis)] / 2) {
    local -= split[static_cast<std::size_t>(axis)] / 2;
    ++axis;
  }
  if (axis == 3) throw ValidationError("rotary pair index out of range");
  const int width = split[static_cast<std::size_t>(axis)];
  const int coord = axis == 0 ? pos.t : (axis == 1 ? pos.h : pos.w);
  const double freq = std::pow(base, -2.0 * local / static_cast<double>(width));
  return coord * freq;
}

void rope3d(std::span<double> vec, const GridPos& pos, int head_dim, double base) {
  if (vec.size() != static_cast<std::size_t>(head_dim)) throw ShapeError("rope3d: vector length != head_dim");
  for (int p = 0; p < head_dim / 2; ++p) {
    const double theta = rope_angle(pos, p, head_dim, base);
    const double c = std::cos(theta), s = std::sin(theta);
    const double x0 = vec[2 * p], x1 = vec[2 * p + 1];
    vec[2 * p] = x0 * c - x1 * s;
    vec[2 * p + 1] = x0 * s + x1 * c;
  }
}

RopeTables rope_tables(std::span<const GridPos> positions, int head_dim, double base) {
  const int half = head_dim / 2;
  RopeTables t;
  t.cos.resize(positions.size() * half);
  t.sin.resize(positions.size() * half);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (int p = 0; p < half; ++p) {
      const double theta = rope_angle(positions[i], p, head_dim, base);
      t.cos[i * half + p] = std::cos(theta);
      t.sin[i * half + p] = std::sin(theta);
    }
  }
  return t;
}

}  // namespace mfm
