#include "pinntl/network/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pinntl/errors.hpp"

namespace pinntl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'I', 'N', 'N', 'T', 'L', 'C', 'K'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <class T>
  void pod(const T& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void matrix(const Matrix& m) {
    pod(static_cast<std::uint32_t>(m.rows()));
    pod(static_cast<std::uint32_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) pod(m(i, j));
  }
  void mask(const Mask& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) pod(static_cast<std::uint8_t>(m(i, j) ? 1 : 0));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <class T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw LoadError("checkpoint is truncated");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 24)) throw LoadError("checkpoint string length is implausible");
    std::string s(n, '\0');
    is_.read(s.data(), n);
    if (!is_) throw LoadError("checkpoint is truncated");
    return s;
  }
  Matrix matrix() {
    const auto r = pod<std::uint32_t>();
    const auto c = pod<std::uint32_t>();
    if (static_cast<std::uint64_t>(r) * c > (1ull << 28)) {
      throw LoadError("checkpoint matrix size is implausible");
    }
    Matrix m(r, c);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = pod<double>();
    return m;
  }
  Mask mask(Index rows, Index cols) {
    Mask m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = pod<std::uint8_t>() != 0;
    return m;
  }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
};

}  // namespace

void save_checkpoint(const Network& net, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  Writer w(buf);
  buf.write(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.pod(meta.seed);
  w.pod(meta.epoch);
  w.str(meta.problem_tag);
  w.pod(static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (int s : net.layer_sizes()) w.pod(static_cast<std::int32_t>(s));
  const auto& lora = net.lora();
  w.pod(static_cast<std::uint8_t>(lora ? 1 : 0));
  if (lora) {
    w.pod(lora->alpha);
    w.pod(static_cast<std::int32_t>(lora->rank));
    w.pod(static_cast<std::uint32_t>(lora->target_layers.size()));
    for (int l : lora->target_layers) w.pod(static_cast<std::int32_t>(l));
  }
  w.pod(static_cast<std::uint32_t>(net.params().size()));
  for (const auto& p : net.params()) {
    w.str(p.name);
    w.matrix(p.value);
    w.mask(p.trainable);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = buf.str();
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("cannot write checkpoint " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path.string());
  Reader r(is);
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw LoadError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint schema version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  CheckpointMeta m;
  m.seed = r.pod<std::uint64_t>();
  m.epoch = r.pod<std::uint64_t>();
  m.problem_tag = r.str();
  const auto n_sizes = r.pod<std::uint32_t>();
  if (n_sizes < 2 || n_sizes > 1024) throw LoadError("checkpoint layer count is implausible");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n_sizes; ++i) sizes.push_back(r.pod<std::int32_t>());
  std::optional<LoraConfig> lora;
  if (r.pod<std::uint8_t>() != 0) {
    LoraConfig c;
    c.alpha = r.pod<double>();
    c.rank = r.pod<std::int32_t>();
    const auto nt = r.pod<std::uint32_t>();
    if (nt > n_sizes) throw LoadError("checkpoint LoRA section is implausible");
    for (std::uint32_t i = 0; i < nt; ++i) c.target_layers.push_back(r.pod<std::int32_t>());
    lora = std::move(c);
  }
  const auto n_params = r.pod<std::uint32_t>();
  if (n_params > 4096) throw LoadError("checkpoint parameter count is implausible");
  std::vector<Parameter> params;
  for (std::uint32_t i = 0; i < n_params; ++i) {
    Parameter p;
    p.name = r.str();
    p.value = r.matrix();
    p.trainable = r.mask(p.value.rows(), p.value.cols());
    params.push_back(std::move(p));
  }
  if (!r.at_end()) throw LoadError("trailing bytes after checkpoint payload");
  if (meta) *meta = m;
  try {
    return Network::from_parts(std::move(sizes), std::move(params), std::move(lora));
  } catch (const ConstructionError& e) {
    throw LoadError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

}  // namespace pinntl
