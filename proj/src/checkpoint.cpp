#include "dmtn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dmtn/errors.hpp"

namespace dmtn {

namespace {

constexpr std::string_view kMagic = "DMTNCKPT";
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    out_.append(s);
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint64_t>(what);
    need(n, what);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > in_.size() - pos_) throw FormatError(pos_, std::string("truncated ") + what);
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(ckpt.config.to_text());
  w.pod<std::uint64_t>(ckpt.vocab.size());
  for (const auto& t : ckpt.vocab.tokens()) w.str(t);
  w.pod<std::uint64_t>(ckpt.params.size());
  for (const auto& p : ckpt.params) {
    w.str(p.name);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(p.kind));
    const Shape& s = p.value.shape();
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(s.rank()));
    for (std::size_t i = 0; i < s.rank(); ++i) w.pod<std::uint64_t>(s[i]);
    w.raw(p.value.data().data(), p.value.size() * sizeof(double));
  }
  w.pod<std::uint64_t>(fnv1a(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic, "magic");
  if (std::string_view(magic, sizeof magic) != kMagic) throw FormatError(0, "not a checkpoint file");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw VersionError(version, kCheckpointVersion);

  Checkpoint ckpt;
  const std::size_t config_at = r.pos();
  try {
    ckpt.config = ModelConfig::from_text(r.str("config"));
  } catch (const ConfigError& e) {
    throw FormatError(config_at, std::string("bad config: ") + e.what());
  }

  const std::size_t vocab_at = r.pos();
  const auto vocab_size = r.pod<std::uint64_t>("vocabulary size");
  if (vocab_size > r.remaining()) throw FormatError(vocab_at, "implausible vocabulary size");
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(r.str("vocabulary token"));
  try {
    ckpt.vocab = babi::Vocabulary(std::move(tokens));
  } catch (const Error& e) {
    throw FormatError(vocab_at, std::string("bad vocabulary: ") + e.what());
  }

  const std::size_t params_at = r.pos();
  const auto count = r.pod<std::uint64_t>("parameter count");
  if (count > r.remaining()) throw FormatError(params_at, "implausible parameter count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t entry_at = r.pos();
    std::string name = r.str("parameter name");
    const auto kind = r.pod<std::uint8_t>("parameter kind");
    if (kind > static_cast<std::uint8_t>(ParamKind::kEmbedding)) {
      throw FormatError(entry_at, "bad kind for parameter '" + name + "'");
    }
    const auto rank = r.pod<std::uint8_t>("parameter rank");
    if (rank < 1 || rank > Shape::kMaxRank) throw FormatError(entry_at, "bad rank for parameter '" + name + "'");
    std::vector<std::size_t> dims(rank);
    std::uint64_t numel = 1;
    for (auto& d : dims) {
      const auto v = r.pod<std::uint64_t>("parameter shape");
      if (v == 0 || v > r.remaining()) throw FormatError(entry_at, "bad shape for parameter '" + name + "'");
      d = static_cast<std::size_t>(v);
      numel *= v;
      if (numel > r.remaining()) throw FormatError(entry_at, "truncated values of parameter '" + name + "'");
    }
    Tensor t{Shape(std::span<const std::size_t>(dims))};
    r.raw(t.data().data(), t.size() * sizeof(double), "parameter values");
    if (ckpt.params.contains(name)) throw FormatError(entry_at, "duplicate parameter '" + name + "'");
    ckpt.params.add(std::move(name), static_cast<ParamKind>(kind), std::move(t));
  }

  const std::size_t hash_at = r.pos();
  const auto stored = r.pod<std::uint64_t>("checksum");
  if (stored != fnv1a(bytes.substr(0, hash_at))) throw FormatError(hash_at, "checksum mismatch");
  if (r.remaining() != 0) throw FormatError(r.pos(), "trailing bytes after checksum");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace dmtn
