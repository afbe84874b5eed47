#pragma once

#include <array>
#include <span>
#include <vector>

namespace mfm {

/// Latent-grid coordinate of a token: (frame, row, column).
struct GridPos {
  int t = 0;
  int h = 0;
  int w = 0;
  bool operator==(const GridPos&) const = default;
};

/// Channels per axis (t, h, w): head_dim * (2/8, 3/8, 3/8). Requires head_dim % 16 == 0.
std::array<int, 3> rope_axis_split(int head_dim);

/// Row-major (t, h, w) enumeration of a latent grid.
std::vector<GridPos> grid_positions(int t, int h, int w);

/// Rotation angle of channel pair `pair` (channels 2*pair, 2*pair+1) at `pos`.
double rope_angle(const GridPos& pos, int pair, int head_dim, double base);

/// Applies 3-D rotary embedding in place to one head vector of length head_dim.
void rope3d(std::span<double> vec, const GridPos& pos, int head_dim, double base = 10000.0);

/// cos/sin tables [tokens, head_dim/2] for the autograd rotation op.
struct RopeTables {
  std::vector<double> cos;
  std::vector<double> sin;
};
RopeTables rope_tables(std::span<const GridPos> positions, int head_dim, double base = 10000.0);

}  // namespace mfm
