#include "mgr/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mgr {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'R', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back(char((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const unsigned char* p;
  size_t remaining;
  const std::string& path;

  void need(size_t n) const {
    if (remaining < n)
      throw CorruptionError("checkpoint '" + path + "' truncated: wanted " +
                            std::to_string(n) + " more bytes, have " +
                            std::to_string(remaining));
  }
  uint32_t u32() {
    need(4);
    uint32_t v = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
                 (uint32_t(p[3]) << 24);
    p += 4;
    remaining -= 4;
    return v;
  }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(p[i]) << (8 * i);
    p += 8;
    remaining -= 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    remaining -= n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, uint32_t(store.size()));
  for (const auto& p : store.items()) {
    put_u32(buf, uint32_t(p->name().size()));
    buf += p->name();
    const Tensor& t = p->tensor();
    put_u32(buf, uint32_t(t.shape().size()));
    for (size_t d : t.shape()) put_u32(buf, uint32_t(d));
    for (real v : t.values()) put_f64(buf, double(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw DataError("short write to checkpoint '" + path + "'");
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 4, bytes.size() - 4, path};
  uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("'" + path + "' has unsupported checkpoint version " +
                      std::to_string(version));
  uint32_t count = r.u32();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    uint32_t name_len = r.u32();
    e.name = r.str(name_len);
    uint32_t ndim = r.u32();
    size_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(r.u32());
      numel *= e.shape.back();
    }
    e.values.resize(numel);
    for (size_t v = 0; v < numel; ++v) e.values[v] = r.f64();
    entries.push_back(std::move(e));
  }
  return entries;
}

void load_checkpoint(ParamStore& store, const std::string& path, const std::string& prefix) {
  std::vector<CheckpointEntry> entries = read_checkpoint(path);
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (Parameter* p : store.with_prefix(prefix)) {
    auto it = by_name.find(p->name());
    if (it == by_name.end())
      throw ContractError("checkpoint '" + path + "' has no entry for parameter '" +
                          p->name() + "'");
    const CheckpointEntry& e = *it->second;
    if (e.shape != p->tensor().shape())
      throw ContractError("checkpoint entry '" + e.name + "' has shape " + shape_str(e.shape) +
                          ", parameter wants " + shape_str(p->tensor().shape()));
    auto vals = p->tensor().values_mut();
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = real(e.values[i]);
  }
}

}  // namespace mgr
