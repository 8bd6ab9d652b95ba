#include "latdyn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace latdyn::io {

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void magic(const char m[4]) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(m[i]));
  }
  void f64s(const Vec& v) {
    for (double x : v) f64(x);
  }
  void str(const std::string& s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  void write_file(const std::string& path) {
    std::uint64_t sum = fnv1a(buf_.data(), buf_.size());
    u64(sum);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(buf_.data()),
            static_cast<std::streamsize>(buf_.size()));
    if (!f) throw FormatError("write failed for '" + path + "'");
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::string& path, const char expect_magic[4]) : path_(path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw FormatError("cannot open '" + path + "'");
    std::streamsize n = f.tellg();
    if (n < 12) throw FormatError("'" + path + "' is truncated");
    buf_.resize(static_cast<std::size_t>(n));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(buf_.data()), n);
    if (!f) throw FormatError("read failed for '" + path + "'");

    std::size_t body = buf_.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf_[body + i]) << (8 * i);
    if (stored != fnv1a(buf_.data(), body))
      throw FormatError("'" + path + "': checksum mismatch, file is corrupt");
    end_ = body;

    for (int i = 0; i < 4; ++i)
      if (buf_[i] != static_cast<std::uint8_t>(expect_magic[i]))
        throw FormatError("'" + path + "': wrong file type (bad magic)");
    pos_ = 4;
  }

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(Vec& out, std::size_t n) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f64();
  }
  std::string str() {
    std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_version(std::uint32_t want) {
    std::uint32_t got = u32();
    if (got != want)
      throw FormatError("'" + path_ + "': format version " + std::to_string(got) +
                        " not supported (expected " + std::to_string(want) + ")");
  }
  void expect_end() const {
    if (pos_ != end_)
      throw FormatError("'" + path_ + "': trailing bytes after payload");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError("'" + path_ + "' is truncated");
  }
  std::string path_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

void write_matrix_body(Writer& w, const Matrix& m) {
  w.u64(m.rows);
  w.u64(m.cols);
  w.f64s(m.data);
}

Matrix read_matrix_body(Reader& r) {
  Matrix m;
  m.rows = r.u64();
  m.cols = r.u64();
  r.f64s(m.data, m.rows * m.cols);
  return m;
}

constexpr std::uint32_t kFeatmatVersion = 1;
constexpr std::uint32_t kQuatseqVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

void write_net(Writer& w, const nn::DenseNet& net) {
  const auto& widths = net.widths();
  w.u8(static_cast<std::uint8_t>(net.head()));
  w.u64(widths.size());
  for (std::size_t x : widths) w.u64(x);
  for (const nn::Param* p : net.params()) w.f64s(p->value.data);
}

nn::DenseNet read_net(Reader& r, const std::string& name) {
  auto head = static_cast<nn::HeadKind>(r.u8());
  if (head != nn::HeadKind::linear && head != nn::HeadKind::softplus)
    throw FormatError("checkpoint: unknown head kind for net '" + name + "'");
  std::size_t nw = r.u64();
  std::vector<std::size_t> widths(nw);
  for (auto& x : widths) x = r.u64();
  nn::DenseNet net(name, widths, head);
  for (nn::Param* p : net.params()) r.f64s(p->value.data, p->value.size());
  return net;
}

}  // namespace

void save_matrix(const std::string& path, const Matrix& m) {
  Writer w;
  w.magic("LDFM");
  w.u32(kFeatmatVersion);
  write_matrix_body(w, m);
  w.write_file(path);
}

Matrix load_matrix(const std::string& path) {
  Reader r(path, "LDFM");
  r.expect_version(kFeatmatVersion);
  Matrix m = read_matrix_body(r);
  r.expect_end();
  return m;
}

void save_rotation_sequence(const std::string& path, const so3::RotationSequence& seq) {
  Writer w;
  w.magic("LDQS");
  w.u32(kQuatseqVersion);
  w.u64(seq.frames);
  w.u64(seq.joints);
  w.f64(seq.frame_interval);
  for (const so3::Rotation& q : seq.data) {
    w.f64(q.w());
    w.f64(q.x());
    w.f64(q.y());
    w.f64(q.z());
  }
  w.write_file(path);
}

so3::RotationSequence load_rotation_sequence(const std::string& path) {
  Reader r(path, "LDQS");
  r.expect_version(kQuatseqVersion);
  std::uint64_t frames = r.u64();
  std::uint64_t joints = r.u64();
  double dt = r.f64();
  if (frames < 1 || joints < 1)
    throw FormatError("'" + path + "': empty rotation sequence");
  so3::RotationSequence seq(frames, joints, dt);
  for (std::size_t i = 0; i < frames * joints; ++i) {
    double w = r.f64(), x = r.f64(), y = r.f64(), z = r.f64();
    seq.data[i] = so3::Rotation::from_unit(w, x, y, z);
  }
  r.expect_end();
  return seq;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  Writer w;
  w.magic("LDCK");
  w.u32(ck.format_version);

  // model
  w.u64(ck.model.d_z);
  w.u64(ck.model.d_p);
  w.u8(static_cast<std::uint8_t>(ck.model.variant));
  w.f64(ck.model.dt);
  w.f64s(ck.model.z_ref);
  write_net(w, ck.model.head_g);
  write_net(w, ck.model.head_kappa);
  write_net(w, ck.model.head_c);
  write_net(w, ck.model.head_m);

  // latent-space block (optional)
  bool has_ls = ck.latent_space.d_z > 0;
  w.u8(has_ls ? 1 : 0);
  if (has_ls) {
    const LatentSpaceModel& ls = ck.latent_space;
    w.u64(ls.d_z);
    write_matrix_body(w, ls.w);
    w.f64s(ls.mu_f);
    w.f64s(ls.mu_z);
    w.f64s(ls.sigma_z);
    w.f64(ls.eps);
    w.f64s(ls.z_ref);
  }

  w.str(ck.config_echo);

  // optimizer block (optional, for exact resume)
  bool has_adam = !ck.adam_m.empty();
  w.u8(has_adam ? 1 : 0);
  if (has_adam) {
    w.f64(ck.adam_lr);
    w.i64(ck.adam_steps);
    w.u64(ck.adam_m.size());
    for (std::size_t i = 0; i < ck.adam_m.size(); ++i) {
      w.u64(ck.adam_m[i].size());
      w.f64s(ck.adam_m[i]);
      w.f64s(ck.adam_v[i]);
    }
  }

  w.write_file(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path, "LDCK");
  Checkpoint ck;
  r.expect_version(kCheckpointVersion);

  ck.model.d_z = r.u64();
  ck.model.d_p = r.u64();
  std::uint8_t vt = r.u8();
  if (vt > 3) throw FormatError("'" + path + "': unknown variant tag");
  ck.model.variant = static_cast<Variant>(vt);
  ck.model.dt = r.f64();
  r.f64s(ck.model.z_ref, ck.model.d_z);
  ck.model.head_g = read_net(r, "g");
  ck.model.head_kappa = read_net(r, "kappa");
  ck.model.head_c = read_net(r, "c");
  ck.model.head_m = read_net(r, "m");
  for (const nn::DenseNet* n :
       {&ck.model.head_g, &ck.model.head_kappa, &ck.model.head_c, &ck.model.head_m}) {
    if (n->input_dim() != ck.model.input_dim() || n->output_dim() != ck.model.d_z)
      throw FormatError("'" + path + "': head shape inconsistent with d_z/d_p header");
  }

  if (r.u8()) {
    LatentSpaceModel& ls = ck.latent_space;
    ls.d_z = r.u64();
    ls.w = read_matrix_body(r);
    r.f64s(ls.mu_f, ls.w.cols);
    r.f64s(ls.mu_z, ls.d_z);
    r.f64s(ls.sigma_z, ls.d_z);
    ls.eps = r.f64();
    r.f64s(ls.z_ref, ls.d_z);
    if (ls.w.rows != ls.d_z)
      throw FormatError("'" + path + "': latent-space projection shape mismatch");
  }

  ck.config_echo = r.str();

  if (r.u8()) {
    ck.adam_lr = r.f64();
    ck.adam_steps = r.i64();
    std::uint64_t n = r.u64();
    ck.adam_m.resize(n);
    ck.adam_v.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uint64_t sz = r.u64();
      r.f64s(ck.adam_m[i], sz);
      r.f64s(ck.adam_v[i], sz);
    }
  }

  r.expect_end();
  return ck;
}

void save_loss_history(const std::string& path, const std::vector<LossRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  f << "epoch,horizon,p_tf,loss\n";
  f.precision(17);
  for (const LossRow& r : rows)
    f << r.epoch << ',' << r.horizon << ',' << r.p_tf << ',' << r.loss << '\n';
  if (!f) throw FormatError("write failed for '" + path + "'");
}

}  // namespace latdyn::io
