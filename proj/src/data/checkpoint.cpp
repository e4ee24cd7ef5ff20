#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "flowforge/data.hpp"

namespace flowforge {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'C', 'F'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string file, std::vector<unsigned char> bytes) : file_(std::move(file)), bytes_(std::move(bytes)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(std::size_t at, const std::string& why) const { throw FormatError(file_, at, why); }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      fail(pos_, std::string("truncated ") + what + ": need " + std::to_string(n) + " bytes, " +
                     std::to_string(remaining()) + " left");
    }
  }
  std::uint64_t uint(int bytes, const char* what) {
    need(bytes, what);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }

 private:
  std::string file_;
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void checkpoint_save(FlowModel& model, const std::filesystem::path& path, const TrainingState& state) {
  if (state.rng.find('\n') != std::string::npos) throw std::invalid_argument("rng state must be a single line");
  std::string block;
  for (const auto& [k, v] : model.spec().to_fields()) block += k + "=" + v + "\n";
  block += "step=" + std::to_string(state.step) + "\n";
  block += "rng=" + state.rng + "\n";

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(block.size()));
  out += block;
  for (const Parameter* p : model.parameters()) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    const std::vector<std::size_t> dims = p->dims();
    put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (std::size_t d : dims) put_u64(out, d);
    for (double v : p->value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(path.string(), {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});

  if (r.text(4, "magic") != std::string(kMagic, 4)) r.fail(0, "bad magic (expected EMCF)");
  const std::uint64_t version = r.uint(4, "version");
  if (version != kCheckpointVersion) {
    r.fail(4, "unsupported format version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t block_at = r.pos();
  const std::uint64_t block_len = r.uint(4, "header length");
  if (block_len > r.remaining()) {
    r.fail(block_at, "header length " + std::to_string(block_len) + " exceeds the " +
                         std::to_string(r.remaining()) + " bytes that follow");
  }
  const std::size_t text_at = r.pos();
  const std::string block = r.text(block_len, "header");
  std::map<std::string, std::string> fields;
  for (std::size_t start = 0; start < block.size();) {
    const std::size_t end = block.find('\n', start);
    if (end == std::string::npos) r.fail(text_at + start, "header line is not newline-terminated");
    const std::string line = block.substr(start, end - start);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) r.fail(text_at + start, "header line '" + line + "' has no '='");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
    start = end + 1;
  }

  LoadedCheckpoint out;
  try {
    out.model = std::make_unique<FlowModel>(ModelSpec::from_fields(fields));
    out.state.step = fields.contains("step") ? std::stoull(fields.at("step")) : 0;
  } catch (const std::exception& e) {
    r.fail(text_at, std::string("invalid header: ") + e.what());
  }
  if (fields.contains("rng")) out.state.rng = fields.at("rng");

  std::set<std::string> seen;
  while (!r.done()) {
    const std::size_t entry_at = r.pos();
    const std::uint64_t name_len = r.uint(4, "name length");
    if (name_len == 0 || name_len > 4096 || name_len > r.remaining()) {
      r.fail(entry_at, "name length " + std::to_string(name_len) + " is invalid (" +
                           std::to_string(r.remaining()) + " bytes left)");
    }
    const std::string name = r.text(name_len, "name");
    Parameter* p = out.model->find(name);
    if (!p) r.fail(entry_at, "unknown parameter '" + name + "'");
    if (!seen.insert(name).second) r.fail(entry_at, "duplicate parameter '" + name + "'");
    const std::size_t rank_at = r.pos();
    const std::uint64_t rank = r.uint(4, "rank");
    if (rank != p->rank) {
      r.fail(rank_at, name + ": rank " + std::to_string(rank) + ", model expects " + std::to_string(p->rank));
    }
    const std::vector<std::size_t> expected = p->dims();
    for (std::size_t k = 0; k < rank; ++k) {
      const std::size_t dim_at = r.pos();
      const std::uint64_t d = r.uint(8, "dimension");
      if (d != expected[k]) {
        r.fail(dim_at, name + ": dimension " + std::to_string(k) + " is " + std::to_string(d) +
                           ", model expects " + std::to_string(expected[k]));
      }
    }
    r.need(8 * p->value.size(), "payload");
    for (double& v : p->value.data()) v = std::bit_cast<double>(r.uint(8, "payload"));
    p->bump();
  }
  for (Parameter* p : out.model->parameters()) {
    if (!seen.contains(p->name)) r.fail(r.pos(), "missing parameter '" + p->name + "'");
  }
  return out;
}

}  // namespace flowforge
