#include "deeppt/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <vector>

namespace dpt {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'P', 'T', '1'};
constexpr uint32_t kFormatVersion = 1;
constexpr uint32_t kMaxNameLen = 4096;

struct Entry {
  std::string name;
  std::vector<uint32_t> extents;
  std::vector<float> data;
};

void append_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void append_bytes(std::vector<uint8_t>& buf, const void* p, size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  buf.insert(buf.end(), b, b + n);
}

class Reader {
public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint32_t u32() {
    if (pos_ + 4 > size_) throw CorruptFileError("weights file truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  void bytes(void* out, size_t n) {
    if (pos_ + n > size_) throw CorruptFileError("weights file truncated");
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }

  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

std::vector<Entry> collect_entries(const NetworkParams<float>& params) {
  std::vector<Entry> entries;
  for (size_t i = 0; i < params.conv.size(); ++i) {
    const auto& l = params.conv[i];
    Entry k;
    k.name = "conv" + std::to_string(i) + ".kernels";
    for (int e : l.kernels.shape()) k.extents.push_back(static_cast<uint32_t>(e));
    k.data.assign(l.kernels.data(), l.kernels.data() + l.kernels.size());
    entries.push_back(std::move(k));
    Entry b;
    b.name = "conv" + std::to_string(i) + ".bias";
    b.extents.push_back(static_cast<uint32_t>(l.biases.size()));
    b.data.assign(l.biases.data(), l.biases.data() + l.biases.size());
    entries.push_back(std::move(b));
  }
  for (const auto& [head, layers] : params.heads) {
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      Entry w;
      w.name = head + ".fc" + std::to_string(i) + ".weight";
      w.extents = {static_cast<uint32_t>(l.weights.rows()),
                   static_cast<uint32_t>(l.weights.cols())};
      // stored row-major
      w.data.resize(static_cast<size_t>(l.weights.size()));
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
          w.data[static_cast<size_t>(r * l.weights.cols() + c)] = l.weights(r, c);
      entries.push_back(std::move(w));
      Entry b;
      b.name = head + ".fc" + std::to_string(i) + ".bias";
      b.extents.push_back(static_cast<uint32_t>(l.biases.size()));
      b.data.assign(l.biases.data(), l.biases.data() + l.biases.size());
      entries.push_back(std::move(b));
    }
  }
  return entries;
}

NetworkParams<float> assemble(const std::map<std::string, Entry>& by_name) {
  NetworkParams<float> params;
  const std::regex conv_re("^conv([0-9]+)\\.(kernels|bias)$");
  const std::regex head_re("^([A-Za-z0-9_]+)\\.fc([0-9]+)\\.(weight|bias)$");

  std::map<size_t, const Entry*> conv_kernels, conv_bias;
  std::map<std::string, std::map<size_t, const Entry*>> head_weight, head_bias;
  for (const auto& [name, e] : by_name) {
    std::smatch m;
    if (std::regex_match(name, m, conv_re)) {
      const size_t idx = std::stoul(m[1]);
      (m[2] == "kernels" ? conv_kernels : conv_bias)[idx] = &e;
    } else if (std::regex_match(name, m, head_re)) {
      const size_t idx = std::stoul(m[2]);
      (m[3] == "weight" ? head_weight : head_bias)[m[1]][idx] = &e;
    } else {
      throw CorruptFileError("weights file has unrecognized entry name '" + name + "'");
    }
  }

  if (conv_kernels.size() != conv_bias.size())
    throw CorruptFileError("weights file conv kernel/bias entries do not pair up");
  for (size_t i = 0; i < conv_kernels.size(); ++i) {
    auto ki = conv_kernels.find(i);
    auto bi = conv_bias.find(i);
    if (ki == conv_kernels.end() || bi == conv_bias.end())
      throw CorruptFileError("weights file conv layer indices are not contiguous");
    const Entry& k = *ki->second;
    const Entry& b = *bi->second;
    if (k.extents.size() != 4 || k.extents[2] != 3 || k.extents[3] != 3)
      throw CorruptFileError("conv kernel entry must have rank 4 with 3x3 taps");
    if (b.extents.size() != 1 || b.extents[0] != k.extents[0])
      throw CorruptFileError("conv bias extent must equal kernel out channels");
    ConvLayerParams<float> l(static_cast<int>(k.extents[0]), static_cast<int>(k.extents[1]));
    std::copy(k.data.begin(), k.data.end(), l.kernels.data());
    std::copy(b.data.begin(), b.data.end(), l.biases.data());
    params.conv.push_back(std::move(l));
  }

  for (const auto& [head, weights] : head_weight) {
    const auto& biases = head_bias[head];
    if (weights.size() != biases.size())
      throw CorruptFileError("head '" + head + "' weight/bias entries do not pair up");
    std::vector<DenseLayerParams<float>> layers;
    for (size_t i = 0; i < weights.size(); ++i) {
      auto wi = weights.find(i);
      auto bi = biases.find(i);
      if (wi == weights.end() || bi == biases.end())
        throw CorruptFileError("head '" + head + "' layer indices are not contiguous");
      const Entry& w = *wi->second;
      const Entry& b = *bi->second;
      if (w.extents.size() != 2)
        throw CorruptFileError("dense weight entry must have rank 2");
      if (b.extents.size() != 1 || b.extents[0] != w.extents[0])
        throw CorruptFileError("dense bias extent must equal out width");
      DenseLayerParams<float> l(static_cast<int>(w.extents[0]), static_cast<int>(w.extents[1]));
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
          l.weights(r, c) = w.data[static_cast<size_t>(r * l.weights.cols() + c)];
      std::copy(b.data.begin(), b.data.end(), l.biases.data());
      layers.push_back(std::move(l));
    }
    params.heads[head] = std::move(layers);
  }
  for (const auto& [head, biases] : head_bias)
    if (!head_weight.count(head))
      throw CorruptFileError("head '" + head + "' has bias entries without weights");

  params.validate();
  return params;
}

}  // namespace

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = seed ^ 0xffffffffu;
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void save_params(const NetworkParams<float>& params, const std::string& path) {
  params.validate();
  const std::vector<Entry> entries = collect_entries(params);

  std::vector<uint8_t> buf;
  append_bytes(buf, kMagic.data(), kMagic.size());
  append_u32(buf, kFormatVersion);
  append_u32(buf, static_cast<uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    append_u32(buf, static_cast<uint32_t>(e.name.size()));
    append_bytes(buf, e.name.data(), e.name.size());
    append_u32(buf, static_cast<uint32_t>(e.extents.size()));
    for (uint32_t ext : e.extents) append_u32(buf, ext);
    static_assert(sizeof(float) == 4);
    append_bytes(buf, e.data.data(), e.data.size() * 4);
  }
  append_u32(buf, crc32_bytes(buf.data(), buf.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

NetworkParams<float> load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < kMagic.size() + 12) throw CorruptFileError("weights file truncated");
  if (std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
    std::string found(reinterpret_cast<const char*>(buf.data()), 4);
    for (char& c : found)
      if (c < 0x20 || c > 0x7e) c = '?';
    throw CorruptFileError("bad magic '" + found + "', expected 'DPT1'");
  }

  const uint32_t stored_crc = [&] {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[buf.size() - 4 + i]) << (8 * i);
    return v;
  }();
  const uint32_t actual_crc = crc32_bytes(buf.data(), buf.size() - 4);
  if (stored_crc != actual_crc) throw CorruptFileError("weights file CRC mismatch");

  Reader r(buf.data(), buf.size() - 4);
  r.u32();  // magic, already checked
  const uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw CorruptFileError("unsupported weights format version " + std::to_string(version));
  const uint32_t count = r.u32();

  std::map<std::string, Entry> by_name;
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    const uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > kMaxNameLen)
      throw CorruptFileError("weights entry name length out of range");
    e.name.resize(name_len);
    r.bytes(e.name.data(), name_len);
    const uint32_t rank = r.u32();
    if (rank == 0 || rank > 4) throw CorruptFileError("weights entry rank out of range");
    uint64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t ext = r.u32();
      if (ext == 0) throw CorruptFileError("weights entry extent must be >= 1");
      e.extents.push_back(ext);
      n *= ext;
    }
    if (n * 4 > r.remaining()) throw CorruptFileError("weights file truncated");
    e.data.resize(n);
    r.bytes(e.data.data(), n * 4);
    if (!by_name.emplace(e.name, std::move(e)).second)
      throw CorruptFileError("weights file has duplicate entry names");
  }
  if (r.remaining() != 0) throw CorruptFileError("weights file has trailing bytes");

  return assemble(by_name);
}

uint64_t params_digest(const NetworkParams<float>& params) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& l : params.conv) {
    mix(l.kernels.data(), static_cast<size_t>(l.kernels.size()) * 4);
    mix(l.biases.data(), static_cast<size_t>(l.biases.size()) * 4);
  }
  for (const auto& [name, layers] : params.heads) {
    mix(name.data(), name.size());
    for (const auto& l : layers) {
      mix(l.weights.data(), static_cast<size_t>(l.weights.size()) * 4);
      mix(l.biases.data(), static_cast<size_t>(l.biases.size()) * 4);
    }
  }
  return h;
}

}  // namespace dpt
