#include "fedforget/dataset_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "fedforget/common.hpp"

namespace fedforget {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'F', 'D', 'S'};

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>(v >> (8 * i)));
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ArgumentError("truncated dataset stream");
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(c)) << (8 * i);
  }
  return v;
}

std::uint32_t get_be32(std::istream& in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ArgumentError("truncated IDX file");
    v = (v << 8) | static_cast<std::uint8_t>(c);
  }
  return v;
}

// Returns the dims of an unsigned-byte IDX stream positioned at its payload.
std::vector<std::uint32_t> idx_header(std::istream& in) {
  const std::uint32_t magic = get_be32(in);
  if ((magic >> 8) != 0x08) throw ArgumentError("IDX file is not unsigned-byte typed");
  std::vector<std::uint32_t> dims(magic & 0xff);
  for (auto& d : dims) d = get_be32(in);
  return dims;
}

}  // namespace

void write_dataset(std::ostream& out, const DatasetSlice& slice) {
  slice.require_homogeneous();
  out.write(kMagic.data(), kMagic.size());
  put_le(out, kDatasetFormatVersion, 1);
  put_le(out, slice.size(), 4);
  put_le(out, slice.dim(), 4);
  for (const auto& ex : slice.examples) {
    for (double v : ex.features) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  for (const auto& ex : slice.examples) put_le(out, static_cast<std::uint16_t>(ex.label), 2);
  for (const auto& ex : slice.examples) put_le(out, static_cast<std::uint8_t>(ex.tag), 1);
}

DatasetSlice read_dataset(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ArgumentError("not a dataset file");
  const auto version = get_le(in, 1);
  if (version != kDatasetFormatVersion) {
    throw ArgumentError("unsupported dataset version " + std::to_string(version));
  }
  const auto count = get_le(in, 4);
  const auto dim = get_le(in, 4);
  DatasetSlice slice;
  slice.examples.resize(count);
  for (auto& ex : slice.examples) {
    ex.features.resize(dim);
    for (double& v : ex.features) v = std::bit_cast<double>(get_le(in, 8));
  }
  for (auto& ex : slice.examples) ex.label = static_cast<int>(get_le(in, 2));
  for (auto& ex : slice.examples) {
    const auto tag = get_le(in, 1);
    if (tag > 1) throw ArgumentError("invalid example tag");
    ex.tag = static_cast<ExampleTag>(tag);
  }
  return slice;
}

void save_dataset(const std::filesystem::path& path, const DatasetSlice& slice) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path.string());
  write_dataset(out, slice);
}

DatasetSlice load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return read_dataset(in);
}

void write_dataset_csv(std::ostream& out, const DatasetSlice& slice) {
  const std::size_t d = slice.dim();
  for (std::size_t i = 0; i < d; ++i) out << 'f' << i << ',';
  out << "label,tag\n";
  const auto old = out.precision(17);
  for (const auto& ex : slice.examples) {
    for (double v : ex.features) out << v << ',';
    out << ex.label << ',' << (ex.tag == ExampleTag::kTrigger ? "trigger" : "benign") << '\n';
  }
  out.precision(old);
}

DatasetSlice load_idx(const std::filesystem::path& images,
                      const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  std::ifstream lab(labels, std::ios::binary);
  if (!img) throw ArgumentError("cannot open " + images.string());
  if (!lab) throw ArgumentError("cannot open " + labels.string());
  const auto idims = idx_header(img);
  const auto ldims = idx_header(lab);
  if (idims.size() < 2 || ldims.size() != 1 || idims[0] != ldims[0]) {
    throw ArgumentError("IDX image/label files disagree");
  }
  std::size_t per = 1;
  for (std::size_t i = 1; i < idims.size(); ++i) per *= idims[i];
  DatasetSlice slice;
  slice.examples.resize(idims[0]);
  std::vector<char> buf(per);
  for (auto& ex : slice.examples) {
    img.read(buf.data(), static_cast<std::streamsize>(per));
    if (!img) throw ArgumentError("truncated IDX image file");
    ex.features.resize(per);
    for (std::size_t i = 0; i < per; ++i) {
      ex.features[i] = static_cast<std::uint8_t>(buf[i]) / 255.0;
    }
    const int c = lab.get();
    if (c == std::char_traits<char>::eof()) throw ArgumentError("truncated IDX label file");
    ex.label = static_cast<std::uint8_t>(c);
  }
  return slice;
}

}  // namespace fedforget
