#include "visitrl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace visitrl {

namespace {

constexpr char kMagic[8] = {'V', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void append(std::vector<char>& buf, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  const auto* bytes = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T read(const std::vector<char>& buf, std::size_t& pos) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("checkpoint: truncated section");
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void Checkpoint::add_mlp(const std::string& name, const Mlp& net) {
  std::vector<char> buf;
  append<std::uint32_t>(buf, static_cast<std::uint32_t>(net.layer_count()));
  append<std::uint32_t>(buf, static_cast<std::uint32_t>(net.input_dim()));
  for (int i = 0; i < net.layer_count(); ++i)
    append<std::uint32_t>(buf, static_cast<std::uint32_t>(net.weight(i).rows()));
  for (int i = 0; i < net.layer_count(); ++i) {
    const auto& w = net.weight(i);
    const auto* data = reinterpret_cast<const char*>(w.data());
    buf.insert(buf.end(), data, data + sizeof(double) * static_cast<std::size_t>(w.size()));
    const auto& b = net.bias(i);
    const auto* bdata = reinterpret_cast<const char*>(b.data());
    buf.insert(buf.end(), bdata, bdata + sizeof(double) * static_cast<std::size_t>(b.size()));
  }
  sections_[name] = std::move(buf);
}

void Checkpoint::add_text(const std::string& name, const std::string& text) {
  sections_[name] = std::vector<char>(text.begin(), text.end());
}

void Checkpoint::add_doubles(const std::string& name, const Eigen::VectorXd& values) {
  std::vector<char> buf;
  append<std::uint64_t>(buf, static_cast<std::uint64_t>(values.size()));
  const auto* data = reinterpret_cast<const char*>(values.data());
  buf.insert(buf.end(), data, data + sizeof(double) * static_cast<std::size_t>(values.size()));
  sections_[name] = std::move(buf);
}

Eigen::VectorXd Checkpoint::doubles(const std::string& name) const {
  const auto& buf = section(name);
  std::size_t pos = 0;
  const auto count = read<std::uint64_t>(buf, pos);
  Eigen::VectorXd values(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = read<double>(buf, pos);
  return values;
}

const std::vector<char>& Checkpoint::section(const std::string& name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end())
    throw std::runtime_error("checkpoint: missing section '" + name + "'");
  return it->second;
}

Mlp Checkpoint::mlp(const std::string& name) const {
  const auto& buf = section(name);
  std::size_t pos = 0;
  const auto n_layers = read<std::uint32_t>(buf, pos);
  const auto input_dim = read<std::uint32_t>(buf, pos);
  std::vector<int> widths(n_layers);
  for (auto& w : widths) w = static_cast<int>(read<std::uint32_t>(buf, pos));
  Rng dummy(0);
  Mlp net(static_cast<int>(input_dim), widths, dummy);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    auto& w = net.weight(static_cast<int>(i));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = read<double>(buf, pos);
    auto& b = net.bias(static_cast<int>(i));
    for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = read<double>(buf, pos);
  }
  if (pos != buf.size()) throw std::runtime_error("checkpoint: trailing bytes in '" + name + "'");
  return net;
}

std::string Checkpoint::text(const std::string& name) const {
  const auto& buf = section(name);
  return std::string(buf.begin(), buf.end());
}

std::vector<std::string> Checkpoint::section_names() const {
  std::vector<std::string> names;
  names.reserve(sections_.size());
  for (const auto& [name, _] : sections_) names.push_back(name);
  return names;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const auto count = static_cast<std::uint32_t>(sections_.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, data] : sections_) {
    const auto name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto data_len = static_cast<std::uint64_t>(data.size());
    out.write(reinterpret_cast<const char*>(&data_len), sizeof(data_len));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic/version in " + path);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint64_t data_len = 0;
    in.read(reinterpret_cast<char*>(&data_len), sizeof(data_len));
    std::vector<char> data(static_cast<std::size_t>(data_len));
    in.read(data.data(), static_cast<std::streamsize>(data.size()));
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
    ckpt.sections_[name] = std::move(data);
  }
  return ckpt;
}

}  // namespace visitrl
