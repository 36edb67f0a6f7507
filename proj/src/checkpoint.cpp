#include "sing/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sing/error.hpp"

namespace sing::ckpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'I', 'N', 'G', 'C', 'K', 'P', 'T'};

template <typename V>
void put(std::vector<std::uint8_t>& out, V v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(V));
}

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

class Cursor {
 public:
  explicit Cursor(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <typename V>
  V get(const char* what) {
    need(sizeof(V), what);
    V v;
    std::memcpy(&v, b_.data() + at_, sizeof(V));
    at_ += sizeof(V);
    return v;
  }

  std::string bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + at_), n);
    at_ += n;
    return s;
  }

  void floats(std::span<float> out, const char* what) {
    need(out.size() * sizeof(float), what);
    std::memcpy(out.data(), b_.data() + at_, out.size() * sizeof(float));
    at_ += out.size() * sizeof(float);
  }

  bool done() const { return at_ == b_.size(); }

 private:
  void need(std::uint64_t n, const char* what) {
    if (n > b_.size() - at_) fail(ErrorKind::kParse, std::string("truncated checkpoint while reading ") + what);
  }

  const std::vector<std::uint8_t>& b_;
  std::size_t at_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void Checkpoint::put(std::string name, Tensor<float> value) {
  for (auto& t : tensors) {
    if (t.name == name) {
      t.value = std::move(value);
      return;
    }
  }
  tensors.push_back({std::move(name), std::move(value)});
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  ckpt::put<std::uint32_t>(out, kVersion);
  put_bytes(out, to_json(c.config).dump());
  put_bytes(out, c.state.dump());
  ckpt::put<std::uint64_t>(out, c.tensors.size());
  for (const auto& t : c.tensors) {
    ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    ckpt::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) ckpt::put<std::uint64_t>(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.value.data());
    out.insert(out.end(), p, p + t.value.size() * sizeof(float));
  }
  return out;
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  Cursor in(bytes);
  if (in.bytes(8, "magic") != std::string(kMagic, 8)) fail(ErrorKind::kParse, "not a SING checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kVersion) {
    fail(ErrorKind::kUnsupportedFormat, "checkpoint version " + std::to_string(version) + " is not supported");
  }
  Checkpoint c;
  try {
    c.config = config_from_json(nlohmann::json::parse(in.bytes(in.get<std::uint64_t>("config size"), "config")));
    c.state = nlohmann::json::parse(in.bytes(in.get<std::uint64_t>("state size"), "state"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("corrupt checkpoint metadata: ") + e.what());
  }
  const auto count = in.get<std::uint64_t>("tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = in.bytes(in.get<std::uint32_t>("tensor name size"), "tensor name");
    const auto rank = in.get<std::uint32_t>("tensor rank");
    if (rank > 8) fail(ErrorKind::kParse, "corrupt checkpoint: tensor " + t.name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t size = 1;
    for (auto& d : shape) {
      d = in.get<std::uint64_t>("tensor shape");
      size *= d;
    }
    if (size > bytes.size()) fail(ErrorKind::kParse, "corrupt checkpoint: tensor " + t.name + " is too large");
    t.value = Tensor<float>(shape);
    in.floats(t.value.values(), "tensor data");
    c.tensors.push_back(std::move(t));
  }
  if (!in.done()) fail(ErrorKind::kParse, "trailing bytes after checkpoint tensors");
  return c;
}

void save(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIo, "failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void store_parameters(Checkpoint& c, std::span<grad::Parameter<float>* const> params, const std::string& prefix) {
  for (const auto* p : params) c.put(prefix + p->name(), p->value());
}

void load_parameters(const Checkpoint& c, std::span<grad::Parameter<float>* const> params,
                     const std::string& prefix) {
  for (auto* p : params) {
    const NamedTensor* t = c.find(prefix + p->name());
    if (!t) fail(ErrorKind::kInvalidInput, "checkpoint has no tensor " + prefix + p->name());
    if (t->value.shape() != p->value().shape()) {
      fail(ErrorKind::kInvalidInput, "checkpoint tensor " + t->name + " has shape " + shape_string(t->value.shape()) +
                                         ", model expects " + shape_string(p->value().shape()));
    }
    p->value() = t->value;
  }
}

}  // namespace sing::ckpt
