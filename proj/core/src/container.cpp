#include "byhd/container.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace byhd {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'B', 'Y', 'H', 'D'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<std::uint8_t> raw(std::size_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> v(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CorruptionError(std::string("container truncated while reading ") + what);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

}  // namespace

void Container::set_meta(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos ||
      value.find('\n') != std::string::npos) {
    throw ContractError("container: metadata key/value may not contain '=' or newlines: " + key);
  }
  for (auto& [k, v] : meta_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  meta_.emplace_back(key, value);
}

std::string Container::meta(const std::string& key) const {
  for (const auto& [k, v] : meta_) {
    if (k == key) return v;
  }
  return {};
}

bool Container::has_meta(const std::string& key) const {
  for (const auto& [k, v] : meta_) {
    if (k == key) return true;
  }
  return false;
}

template <typename T>
void Container::add(const std::string& name, const Tensor<T>& t) {
  if (contains(name)) throw ContractError("container: duplicate tensor '" + name + "'");
  ContainerTensor e;
  e.name = name;
  e.dtype = dtype_of<T>();
  e.shape = t.shape();
  const auto* p = reinterpret_cast<const std::uint8_t*>(t.ptr());
  e.payload.assign(p, p + t.numel() * static_cast<std::int64_t>(sizeof(T)));
  tensors_.push_back(std::move(e));
}

bool Container::contains(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const ContainerTensor& Container::entry(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ContractError("container: no tensor named '" + name + "'");
}

template <typename T>
Tensor<T> Container::get(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype != dtype_of<T>()) throw FormatError("container: dtype mismatch for '" + name + "'");
  Tensor<T> t(e.shape);
  std::memcpy(t.mutable_ptr(), e.payload.data(), e.payload.size());
  return t;
}

std::vector<std::uint8_t> Container::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  std::string text;
  for (const auto& [k, v] : meta_) text += k + "=" + v + "\n";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& t : tensors_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (const auto e : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    out.insert(out.end(), t.payload.begin(), t.payload.end());
  }
  return out;
}

Container Container::parse(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("container: bad magic (expected \"BYHD\")");
  }
  Reader r(bytes);
  r.str(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw FormatError("container: unsupported version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kVersion) + ")");
  }
  Container c;
  const auto meta_len = r.get<std::uint32_t>("metadata length");
  const std::string text = r.str(meta_len, "metadata");
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CorruptionError("container: metadata line without '='");
    c.meta_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerTensor t;
    const auto name_len = r.get<std::uint32_t>("name length");
    t.name = r.str(name_len, "tensor name");
    const auto code = r.get<std::uint8_t>("dtype");
    if (code != 1 && code != 2) {
      throw CorruptionError("container: unknown dtype code " + std::to_string(code));
    }
    t.dtype = static_cast<DType>(code);
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 16) throw CorruptionError("container: implausible rank " + std::to_string(rank));
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto e = r.get<std::uint64_t>("extent");
      if (e > (1ULL << 40)) throw CorruptionError("container: implausible extent");
      t.shape.push_back(static_cast<std::int64_t>(e));
      n *= e;
    }
    const auto payload = n * dtype_size(t.dtype);
    if (payload > r.remaining()) {
      throw CorruptionError("container truncated in payload of '" + t.name + "'");
    }
    t.payload = r.raw(static_cast<std::size_t>(payload), "payload");
    c.tensors_.push_back(std::move(t));
  }
  return c;
}

void Container::save(const std::string& path) const {
  const auto bytes = serialize();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

Container Container::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return parse(bytes);
}

template <typename T>
void checkpoint_save(const std::string& path, const ParamStore<T>& store,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
  Container c;
  for (const auto& [k, v] : meta) c.set_meta(k, v);
  for (const auto& [name, t] : store.params()) c.add(name, t);
  for (const auto& [name, t] : store.buffers()) c.add(name, t);
  c.save(path);
}

template <typename T>
void checkpoint_restore(const Container& ckpt, ParamStore<T>& store) {
  auto copy_into = [&](const std::string& name, Tensor<T> dst) {
    if (!ckpt.contains(name)) throw ContractError("checkpoint lacks tensor '" + name + "'");
    const Tensor<T> src = ckpt.get<T>(name);
    if (src.shape() != dst.shape()) {
      throw ContractError("checkpoint tensor '" + name + "' has shape " + shape_str(src.shape()) +
                          ", model expects " + shape_str(dst.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  };
  for (const auto& [name, t] : store.params()) copy_into(name, t);
  for (const auto& [name, t] : store.buffers()) copy_into(name, t);
}

template void Container::add(const std::string&, const Tensor<float>&);
template void Container::add(const std::string&, const Tensor<double>&);
template Tensor<float> Container::get(const std::string&) const;
template Tensor<double> Container::get(const std::string&) const;
template void checkpoint_save(const std::string&, const ParamStore<float>&,
                              const std::vector<std::pair<std::string, std::string>>&);
template void checkpoint_save(const std::string&, const ParamStore<double>&,
                              const std::vector<std::pair<std::string, std::string>>&);
template void checkpoint_restore(const Container&, ParamStore<float>&);
template void checkpoint_restore(const Container&, ParamStore<double>&);

}  // namespace byhd
