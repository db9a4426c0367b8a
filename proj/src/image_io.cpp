#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "triq/dataio.hpp"
#include "triq/error.hpp"

namespace triq {

Tensor load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw FormatError("cannot decode image " + path.string());
  if (raw.depth() != CV_8U && raw.depth() != CV_16U) {
    throw FormatError(path.string() + ": only 8- and 16-bit images are supported");
  }
  const double max_value = raw.depth() == CV_16U ? 65535.0 : 255.0;
  const int channels = raw.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw FormatError(path.string() + ": unsupported channel count " + std::to_string(channels));
  }
  const auto h = static_cast<std::size_t>(raw.rows), w = static_cast<std::size_t>(raw.cols);
  cv::Mat img;
  raw.convertTo(img, CV_64F, 1.0 / max_value);
  Tensor out({h, w, 3});
  auto o = out.data_mut();
  for (std::size_t y = 0; y < h; ++y) {
    const double* row = img.ptr<double>(static_cast<int>(y));
    for (std::size_t x = 0; x < w; ++x) {
      double* px = o.data() + (y * w + x) * 3;
      if (channels == 1) {
        px[0] = px[1] = px[2] = row[x];
      } else {
        // OpenCV stores BGR(A).
        const double* src = row + x * static_cast<std::size_t>(channels);
        px[0] = src[2];
        px[1] = src[1];
        px[2] = src[0];
      }
    }
  }
  return out;
}

void save_png(const std::filesystem::path& path, const Tensor& image) {
  const std::size_t c = image.rank() == 2 ? 1 : image.rank() == 3 ? image.dim(2) : 0;
  if (c != 1 && c != 3) throw DimensionError("save_png: expected [H,W], [H,W,1] or [H,W,3], got " +
                                             shape_to_string(image.shape()));
  const auto h = static_cast<int>(image.dim(0)), w = static_cast<int>(image.dim(1));
  cv::Mat out(h, w, c == 1 ? CV_8UC1 : CV_8UC3);
  auto in = image.data();
  for (int y = 0; y < h; ++y) {
    auto* row = out.ptr<unsigned char>(y);
    for (int x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = in[(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)) * c + ch];
        const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        // RGB -> BGR for OpenCV.
        const std::size_t dst = c == 3 ? 2 - ch : 0;
        row[static_cast<std::size_t>(x) * c + dst] = byte;
      }
    }
  }
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write " + path.string());
}

Tensor half_size(const Tensor& image) {
  if (image.rank() != 3) throw DimensionError("half_size expects an [H, W, C] image");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (h < 2 || w < 2) throw ContractError("half_size needs at least a 2x2 image");
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out({oh, ow, c});
  auto o = out.data_mut();
  auto in = image.data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const std::size_t y1 = std::min(h, 2 * oy + 2), x1 = std::min(w, 2 * ox + 2);
      const double count = static_cast<double>((y1 - 2 * oy) * (x1 - 2 * ox));
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t y = 2 * oy; y < y1; ++y)
          for (std::size_t x = 2 * ox; x < x1; ++x) acc += in[(y * w + x) * c + ch];
        o[(oy * ow + ox) * c + ch] = acc / count;
      }
    }
  }
  return out;
}

double spatial_information(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 3 && image.dim(2) != 1)) {
    throw DimensionError("spatial_information expects an [H, W, 3] image");
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (h < 3 || w < 3) throw ParameterError("spatial_information needs at least a 3x3 image");
  auto in = image.data();
  std::vector<double> luma(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    luma[i] = c == 1 ? in[i] : 0.299 * in[i * 3] + 0.587 * in[i * 3 + 1] + 0.114 * in[i * 3 + 2];
  }
  const auto at = [&](std::size_t y, std::size_t x) { return luma[y * w + x]; };
  std::vector<double> magnitude;
  magnitude.reserve((h - 2) * (w - 2));
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      magnitude.push_back(std::sqrt(gx * gx + gy * gy));
    }
  }
  double mean = 0.0;
  for (double m : magnitude) mean += m;
  mean /= static_cast<double>(magnitude.size());
  double var = 0.0;
  for (double m : magnitude) var += (m - mean) * (m - mean);
  return std::sqrt(var / static_cast<double>(magnitude.size()));
}

}  // namespace triq
