// Writes a synthetic rectified pair with ground truth:
//   make_stereo_pair <outdir> [two-plane|occluder] [width height]
// Files: left.png, right.png, gt.png (16-bit disparity), noc.png (gt with
// pixels hidden in the right view removed).

#include "consensus/io/image_io.hpp"
#include "consensus/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

using namespace consensus;
namespace fs = std::filesystem;

namespace {

Grid<std::uint8_t> to_u8(const Image& img) {
  Grid<std::uint8_t> out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img[i], 0.0f, 255.0f)));
  return out;
}

// A left pixel is hidden when a nearer surface lands on the same right column.
Grid<std::uint8_t> visible_mask(const Grid<float>& d) {
  Grid<std::uint8_t> vis(d.width(), d.height(), 1);
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      const double xr = x - d(x, y);
      if (xr < 0) {
        vis(x, y) = 0;
        continue;
      }
      for (int x2 = x + 1; x2 < d.width(); ++x2)
        if (d(x2, y) > d(x, y) + 0.5 && std::abs(x2 - d(x2, y) - xr) < 0.5) {
          vis(x, y) = 0;
          break;
        }
    }
  return vis;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_stereo_pair <outdir> [two-plane|occluder] [width height]\n";
    return 1;
  }
  const fs::path out(argv[1]);
  const std::string kind = argc > 2 ? argv[2] : "two-plane";
  fs::create_directories(out);

  Grid<float> truth;
  Image left, right;
  if (kind == "occluder") {
    synthetic::OccluderScene s;
    if (argc > 4) {
      s.width = std::stoi(argv[3]);
      s.height = std::stoi(argv[4]);
    }
    truth = s.truth();
    std::tie(left, right) = s.render(11);
  } else if (kind == "two-plane") {
    synthetic::TwoPlaneScene s;
    if (argc > 4) {
      s.width = std::stoi(argv[3]);
      s.height = std::stoi(argv[4]);
      s.crease = s.width / 2;
    }
    truth = s.truth();
    std::tie(left, right) = synthetic::render_pair(truth, 11);
  } else {
    std::cerr << "unknown scene '" << kind << "'\n";
    return 1;
  }

  const Grid<std::uint8_t> vis = visible_mask(truth);
  Grid<std::uint8_t> all(truth.width(), truth.height(), 1);
  io::write_png8((out / "left.png").string(), to_u8(left));
  io::write_png8((out / "right.png").string(), to_u8(right));
  io::write_disparity(truth, (out / "gt.png").string(), &all);
  io::write_disparity(truth, (out / "noc.png").string(), &vis);
  std::cout << "wrote " << kind << " pair " << truth.width() << "x" << truth.height()
            << " to " << out.string() << '\n';
  return 0;
}
