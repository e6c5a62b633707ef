#include "dciris/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dciris {

namespace {

int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return value;
}

}  // namespace

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::string magic(2, '\0');
  f.read(magic.data(), 2);
  if (magic != "P5") throw std::runtime_error("not a P5 PGM: " + path.string());
  const int w = read_pnm_token(f);
  const int h = read_pnm_token(f);
  const int maxval = read_pnm_token(f);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported PGM header: " + path.string());
  f.get();  // single whitespace byte before the raster
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw std::runtime_error("truncated PGM: " + path.string());
  Tensor img({1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  for (std::size_t i = 0; i < raw.size(); ++i)
    img[i] = static_cast<double>(raw[i]) / 255.0;
  return img;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  require(image.rank() == 3 && image.dim(0) == 1, "write_pgm: image must have shape (1, H, W)");
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(h * w);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = image[i];
    require(v >= 0.0 && v <= 1.0, "write_pgm: values must lie in [0, 1]");
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

namespace {

nlohmann::json circle_to_json(const Circle& c) {
  return nlohmann::json{{"cx", c.cx}, {"cy", c.cy}, {"r", c.r}};
}

Circle circle_from_json(const nlohmann::json& j) {
  Circle c;
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.r = j.at("r").get<double>();
  return c;
}

}  // namespace

void save_dataset_index(const DatasetIndex& index) {
  nlohmann::json records = nlohmann::json::array();
  for (const AnnotationRecord& r : index.records) {
    records.push_back(nlohmann::json{{"image_path", r.image_path},
                                     {"mask_path", r.mask_path},
                                     {"identity_label", r.identity_label},
                                     {"split", r.split},
                                     {"iris", circle_to_json(r.gt.iris)},
                                     {"pupil", circle_to_json(r.gt.pupil)}});
  }
  nlohmann::json doc{{"records", records}};
  std::ofstream f(index.root / "index.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write index: " + (index.root / "index.json").string());
  f << doc.dump(2) << "\n";
}

DatasetIndex load_dataset_index(const std::filesystem::path& root) {
  std::ifstream f(root / "index.json");
  if (!f) throw std::runtime_error("cannot open index: " + (root / "index.json").string());
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed index: " + std::string(e.what()));
  }
  DatasetIndex index;
  index.root = root;
  try {
    for (const auto& j : doc.at("records")) {
      AnnotationRecord r;
      r.image_path = j.at("image_path").get<std::string>();
      r.mask_path = j.at("mask_path").get<std::string>();
      r.identity_label = j.at("identity_label").get<std::int64_t>();
      r.split = j.at("split").get<std::string>();
      r.gt.iris = circle_from_json(j.at("iris"));
      r.gt.pupil = circle_from_json(j.at("pupil"));
      index.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed index: " + std::string(e.what()));
  }
  for (const AnnotationRecord& r : index.records) {
    if (!std::filesystem::exists(root / r.image_path))
      throw std::runtime_error("missing image file: " + r.image_path);
    if (!std::filesystem::exists(root / r.mask_path))
      throw std::runtime_error("missing mask file: " + r.mask_path);
    if (!is_valid_double_circle(r.gt))
      throw std::runtime_error("degenerate annotation for " + r.image_path);
    if (r.split != "train" && r.split != "test")
      throw std::runtime_error("unknown split \"" + r.split + "\" for " + r.image_path);
  }
  return index;
}

LoadedRecord load_record(const DatasetIndex& index, std::size_t i) {
  require(i < index.records.size(), "load_record: index out of range");
  const AnnotationRecord& r = index.records[i];
  LoadedRecord out;
  out.image = read_pgm(index.root / r.image_path);
  out.mask = read_pgm(index.root / r.mask_path);
  out.gt = r.gt;
  out.identity = r.identity_label;
  require(out.mask.is_binary(), "load_record: mask file is not binary");
  return out;
}

}  // namespace dciris
