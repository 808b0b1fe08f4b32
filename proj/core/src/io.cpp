#include "sir/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sir/errors.hpp"

namespace sir {

namespace {

// Skips PNM whitespace and '#' comments, returns the next token.
std::string next_pnm_token(std::istream& is, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw DataError("'" + path.string() + "': truncated PNM header");
  return tok;
}

int parse_int(const std::string& tok, const std::filesystem::path& path) {
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw DataError("'" + path.string() + "': bad PNM header token '" + tok + "'");
  }
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image '" + path.string() + "'");

  std::string magic = next_pnm_token(is, path);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw DataError("'" + path.string() + "': unsupported PNM magic '" + magic +
                    "' (need binary P5 or P6)");
  }
  int width = parse_int(next_pnm_token(is, path), path);
  int height = parse_int(next_pnm_token(is, path), path);
  int maxval = parse_int(next_pnm_token(is, path), path);
  if (width <= 0 || height <= 0) throw DataError("'" + path.string() + "': bad dimensions");
  if (maxval != 255) {
    throw DataError("'" + path.string() + "': only maxval 255 supported, got " +
                    std::to_string(maxval));
  }

  std::size_t n = static_cast<std::size_t>(width) * height * channels;
  std::vector<unsigned char> raw(n);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw DataError("'" + path.string() + "': truncated pixel data");
  }

  Image img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (!image.valid()) throw DataError("write_pnm: invalid image");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");

  os << (image.channels == 1 ? "P5" : "P6") << "\n"
     << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    double v = std::clamp(image.pixels[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw DataError("short write to '" + path.string() + "'");
}

LandmarkSet read_pts(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open annotation '" + path.string() + "'");

  std::string line;
  int nPoints = -1;
  int lineNo = 0;
  LandmarkSet out;
  bool inBody = false;
  while (std::getline(is, line)) {
    ++lineNo;
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    if (trimmed.empty()) continue;
    if (trimmed.rfind("version:", 0) == 0) continue;
    if (trimmed.rfind("n_points:", 0) == 0) {
      try {
        nPoints = std::stoi(trimmed.substr(9));
      } catch (const std::exception&) {
        throw DataError("'" + path.string() + "' line " + std::to_string(lineNo) +
                        ": bad n_points");
      }
      continue;
    }
    if (trimmed[0] == '{') {
      inBody = true;
      continue;
    }
    if (trimmed[0] == '}') break;
    if (!inBody && nPoints < 0) {
      throw DataError("'" + path.string() + "' line " + std::to_string(lineNo) +
                      ": expected pts header");
    }
    std::istringstream ls(trimmed);
    double x, y;
    if (!(ls >> x >> y)) {
      throw DataError("'" + path.string() + "' line " + std::to_string(lineNo) +
                      ": expected 'x y', got '" + trimmed + "'");
    }
    out.points.push_back({x, y});
  }
  if (nPoints >= 0 && static_cast<int>(out.points.size()) != nPoints) {
    throw DataError("'" + path.string() + "': header says " + std::to_string(nPoints) +
                    " points, file has " + std::to_string(out.points.size()));
  }
  if (out.points.empty()) throw DataError("'" + path.string() + "': no landmarks found");
  return out;
}

void write_pts(const std::filesystem::path& path, const LandmarkSet& landmarks) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os << "version: 1\n";
  os << "n_points: " << landmarks.count() << "\n{\n";
  os.precision(10);
  for (const Point2& p : landmarks.points) os << p.x << " " << p.y << "\n";
  os << "}\n";
  if (!os) throw DataError("short write to '" + path.string() + "'");
}

}  // namespace sir
