#include "gridsizer/diff/params.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gridsizer::ad {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'Z', 'W'};
constexpr std::uint32_t kFormat = 1;

static_assert(std::endian::native == std::endian::little, "weight container assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, b_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* dst, std::size_t n) {
    need(n * 8);
    std::memcpy(dst, b_.data() + pos_, n * 8);
    pos_ += n * 8;
  }
  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("weight file truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor& ModelParams::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  if (!t.requires_grad()) t = Tensor::from(t.values(), t.rows(), t.cols(), true);
  index_.emplace(name, names_.size());
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ModelParams::add_xavier(const std::string& name, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out));
  for (auto& x : v) x = u(rng);
  return add(name, Tensor::from(std::move(v), fan_in, fan_out, true));
}

Tensor& ModelParams::add_zeros(const std::string& name, int rows, int cols) {
  return add(name, Tensor::zeros(rows, cols, true));
}

Tensor& ModelParams::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return tensors_[it->second];
}

const Tensor& ModelParams::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return tensors_[it->second];
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<Tensor> ModelParams::tensors() const { return tensors_; }

void ModelParams::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

void ModelParams::scale_grad(double s) {
  for (auto& t : tensors_)
    for (auto& g : t.node()->grad) g *= s;
}

void ModelParams::set_rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  rng_state_ = os.str();
}

void ModelParams::restore_rng(std::mt19937_64& rng) const {
  if (rng_state_.empty()) return;
  std::istringstream is(rng_state_);
  is >> rng;
}

ModelParams ModelParams::clone() const {
  ModelParams out(version_);
  out.attributes_ = attributes_;
  out.rng_state_ = rng_state_;
  for (std::size_t i = 0; i < names_.size(); ++i)
    out.add(names_[i], Tensor::from(tensors_[i].values(), tensors_[i].rows(), tensors_[i].cols(), true));
  return out;
}

std::string ModelParams::to_bytes() const {
  std::string out(kMagic, 4);
  put_u32(out, kFormat);
  put_str(out, version_);
  put_u32(out, static_cast<std::uint32_t>(attributes_.size()));
  for (const auto& [k, v] : attributes_) {
    put_str(out, k);
    put_str(out, v);
  }
  put_str(out, rng_state_);
  put_u32(out, static_cast<std::uint32_t>(names_.size()));
  for (const auto& n : names_) put_str(out, n);
  for (const auto& t : tensors_) {
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
  }
  for (const auto& t : tensors_) out.append(reinterpret_cast<const char*>(t.values().data()), t.size() * 8);
  return out;
}

ModelParams ModelParams::from_bytes(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a gridsizer weight file (bad magic)");
  const auto format = r.u32();
  if (format != kFormat) throw FormatError("unsupported weight file format " + std::to_string(format));
  ModelParams p(r.str());
  const auto n_attr = r.u32();
  for (std::uint32_t i = 0; i < n_attr; ++i) {
    auto k = r.str();
    p.attributes_[k] = r.str();
  }
  p.rng_state_ = r.str();
  const auto n = r.u32();
  std::vector<std::string> names(n);
  for (auto& s : names) s = r.str();
  std::vector<std::pair<int, int>> shapes(n);
  for (auto& [rows, cols] : shapes) {
    rows = static_cast<int>(r.u32());
    cols = static_cast<int>(r.u32());
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(shapes[i].first) * static_cast<std::size_t>(shapes[i].second));
    r.doubles(v.data(), v.size());
    p.add(names[i], Tensor::from(std::move(v), shapes[i].first, shapes[i].second, true));
  }
  if (!r.done()) throw FormatError("trailing bytes after weight payload");
  return p;
}

void ModelParams::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const auto bytes = to_bytes();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_bytes(ss.str());
}

nlohmann::json ModelParams::to_json() const {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < names_.size(); ++i)
    tensors.push_back({{"name", names_[i]},
                       {"shape", {tensors_[i].rows(), tensors_[i].cols()}},
                       {"values", tensors_[i].values()}});
  return {{"version", version_}, {"attributes", attributes_}, {"tensors", std::move(tensors)}};
}

void AdamW::step(ModelParams& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    auto& t = params.get(name);
    auto& w = t.mutable_values();
    const auto& g = t.grad();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != w.size()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
      v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
      w[i] -= lr * weight_decay * w[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

}  // namespace gridsizer::ad
