#include "ataseg/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ataseg/error.hpp"

namespace ataseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> png_write(const std::vector<std::uint8_t>& pixels, int width,
                                    int height, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> png_read(std::span<const std::uint8_t> bytes, png_uint_32 format,
                                   int* width, int* height) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("PNG decode failed: ") + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError(std::string("PNG decode failed: ") + image.message);
  }
  *width = static_cast<int>(image.width);
  *height = static_cast<int>(image.height);
  return pixels;
}

class BinWriter {
 public:
  explicit BinWriter(std::ostream& os) : os_(os) {}
  template <typename T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(std::span<const double> v) {
    os_.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void raw(std::string_view s) { os_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  std::ostream& os_;
};

class BinReader {
 public:
  BinReader(std::span<const std::uint8_t> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<double> get_doubles(std::uint64_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) fail("truncated");
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(context_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

constexpr std::string_view kCheckpointEnd = "END\n";

std::string scene_name(const char* prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << std::setw(5) << std::setfill('0') << i << ".png";
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw UsageError("encode_png expects H x W x 3");
  std::vector<std::uint8_t> px(image.size());
  auto d = image.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(d[i], 0.0, 1.0) * 255.0));
  }
  return png_write(px, static_cast<int>(image.dim(1)), static_cast<int>(image.dim(0)),
                   PNG_FORMAT_RGB);
}

Tensor decode_png(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  auto px = png_read(bytes, PNG_FORMAT_RGB, &w, &h);
  Tensor out = Tensor::image(h, w, 3);
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = px[i] / 255.0;
  return out;
}

std::vector<std::uint8_t> encode_label_png(std::span<const int> labels, int height, int width) {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw UsageError("label raster size does not match dimensions");
  }
  std::vector<std::uint8_t> px(labels.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 255) throw UsageError("class id does not fit in 8 bits");
    px[i] = static_cast<std::uint8_t>(labels[i]);
  }
  return png_write(px, width, height, PNG_FORMAT_GRAY);
}

std::vector<int> decode_label_png(std::span<const std::uint8_t> bytes, int* height, int* width) {
  auto px = png_read(bytes, PNG_FORMAT_GRAY, width, height);
  return std::vector<int>(px.begin(), px.end());
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

void save_checkpoint(const fs::path& path, const SegNet& net, const AdamState* adam) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  BinWriter w(os);
  w.raw(kCheckpointTag);
  w.raw("\n");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    w.put<std::int32_t>(l.kernel);
    w.put<std::int32_t>(l.in_channels);
    w.put<std::int32_t>(l.out_channels);
    w.put<std::int32_t>(static_cast<std::int32_t>(l.activation));
  }
  w.put<std::uint64_t>(net.param_count());
  w.put_doubles(net.params());
  w.put<std::uint8_t>(adam ? 1 : 0);
  if (adam) {
    w.put<std::int64_t>(adam->step_count);
    w.put<double>(adam->lr);
    w.put<double>(adam->beta1);
    w.put<double>(adam->beta2);
    w.put<double>(adam->eps);
    w.put<std::uint64_t>(adam->m.size());
    w.put_doubles(adam->m);
    w.put_doubles(adam->v);
  }
  w.raw(kCheckpointEnd);
  if (!os) throw FormatError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto bytes = read_file(path);
  BinReader r(bytes, "checkpoint " + path.string());
  if (r.raw(kCheckpointTag.size() + 1) != std::string(kCheckpointTag) + "\n") {
    r.fail(std::string("missing format tag ") + std::string(kCheckpointTag));
  }
  const auto layer_count = r.get<std::uint32_t>();
  if (layer_count == 0 || layer_count > 64) r.fail("implausible layer count");
  std::vector<ConvLayer> layers;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    ConvLayer l;
    l.kernel = r.get<std::int32_t>();
    l.in_channels = r.get<std::int32_t>();
    l.out_channels = r.get<std::int32_t>();
    const auto act = r.get<std::int32_t>();
    if (act < 0 || act > 2) r.fail("unknown activation code");
    l.activation = static_cast<Activation>(act);
    layers.push_back(l);
  }
  const auto n = r.get<std::uint64_t>();
  auto params = r.get_doubles(n);
  Checkpoint ck;
  try {
    ck.net = SegNet(std::move(layers), std::move(params));
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  if (r.get<std::uint8_t>()) {
    AdamState s;
    s.step_count = r.get<std::int64_t>();
    s.lr = r.get<double>();
    s.beta1 = r.get<double>();
    s.beta2 = r.get<double>();
    s.eps = r.get<double>();
    const auto m = r.get<std::uint64_t>();
    if (m != ck.net.param_count()) r.fail("optimizer state length mismatch");
    s.m = r.get_doubles(m);
    s.v = r.get_doubles(m);
    ck.adam = std::move(s);
  }
  if (r.raw(kCheckpointEnd.size()) != kCheckpointEnd || !r.at_end()) {
    r.fail("missing end marker");
  }
  return ck;
}

void save_dataset(const fs::path& dir, std::span<const Scene> scenes) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["kind"] = "ataseg-dataset";
  manifest["scenes"] = json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    const auto img = scene_name("scene_", i);
    const auto lab = scene_name("labels_", i);
    write_file(dir / img, encode_png(s.image));
    write_file(dir / lab, encode_label_png(s.labels, s.height(), s.width()));
    manifest["scenes"].push_back({{"image", img},
                                  {"labels", lab},
                                  {"seed", s.seed},
                                  {"num_classes", s.num_classes}});
  }
  write_text(dir / "manifest.json", manifest.dump(2));
}

std::vector<Scene> load_dataset(const fs::path& dir) {
  const auto text = read_file(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  if (manifest.value("format_version", 0) != kFormatVersion ||
      manifest.value("kind", "") != "ataseg-dataset") {
    throw FormatError("dataset manifest: unsupported format_version or kind");
  }
  std::vector<Scene> out;
  for (const auto& entry : manifest.at("scenes")) {
    Scene s;
    s.image = decode_png(read_file(dir / entry.at("image").get<std::string>()));
    int h = 0, w = 0;
    s.labels = decode_label_png(read_file(dir / entry.at("labels").get<std::string>()), &h, &w);
    if (h != s.height() || w != s.width()) throw FormatError("dataset: label raster size mismatch");
    s.seed = entry.at("seed").get<std::uint64_t>();
    s.num_classes = entry.at("num_classes").get<int>();
    out.push_back(std::move(s));
  }
  return out;
}

std::string encode_selected(const ActiveLabelSet& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.entries.size(); ++i) {
    const auto& e = labels.entries[i];
    if (i) out += ';';
    out += std::to_string(e.row) + ':' + std::to_string(e.col) + ':' + std::to_string(e.class_id);
  }
  return out;
}

std::vector<PixelLabel> decode_selected(const std::string& text) {
  std::vector<PixelLabel> out;
  if (text.empty()) return out;
  for (const auto& item : split(text, ';')) {
    auto parts = split(item, ':');
    if (parts.size() != 3) throw FormatError("bad selected_pixels entry '" + item + "'");
    try {
      out.push_back({std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2])});
    } catch (const std::exception&) {
      throw FormatError("bad selected_pixels entry '" + item + "'");
    }
  }
  return out;
}

void write_frames_csv(const fs::path& path, const std::vector<FrameRecord>& records) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "# format_version: " << kFormatVersion << "\n";
  os << "frame,domain,ce,ce_aug,ent,cst,total,adapted,oracle_failed,selected_pixels,"
        "confusion,miou_cum,miou_domain\n";
  for (const auto& r : records) {
    std::string cm;
    const auto& counts = r.confusion_delta.counts();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i) cm += ';';
      cm += std::to_string(counts[i]);
    }
    os << r.frame_id << ',' << r.domain_id << ',' << fmt_double(r.losses.ce) << ','
       << fmt_double(r.losses.ce_aug) << ',' << fmt_double(r.losses.ent) << ','
       << fmt_double(r.losses.cst) << ',' << fmt_double(r.losses.total) << ','
       << (r.adapted ? 1 : 0) << ',' << (r.oracle_failed ? 1 : 0) << ','
       << encode_selected(r.selected) << ',' << cm << ',' << fmt_double(r.miou_cum) << ','
       << fmt_double(r.miou_domain) << '\n';
  }
}

std::vector<CsvFrameRow> read_frames_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "# format_version: " + std::to_string(kFormatVersion)) {
    throw FormatError(path.string() + ": unsupported format_version");
  }
  if (!std::getline(is, line) || line.rfind("frame,domain,", 0) != 0) {
    throw FormatError(path.string() + ": missing header");
  }
  std::vector<CsvFrameRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 13) throw FormatError(path.string() + ": wrong column count");
    CsvFrameRow row;
    try {
      row.frame = std::stoll(f[0]);
      row.domain = std::stoi(f[1]);
      row.ce = std::stod(f[2]);
      row.ce_aug = std::stod(f[3]);
      row.ent = std::stod(f[4]);
      row.cst = std::stod(f[5]);
      row.total = std::stod(f[6]);
      row.adapted = f[7] == "1";
      row.oracle_failed = f[8] == "1";
      row.selected = decode_selected(f[9]);
      for (const auto& c : split(f[10], ';')) row.confusion.push_back(std::stoll(c));
      row.miou_cum = std::stod(f[11]);
      row.miou_domain = std::stod(f[12]);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ataseg
