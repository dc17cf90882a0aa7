#include "hsflow/checkpoint.hpp"

#include "hsflow/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace hsflow {

using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "hsflow-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void put_doubles(std::ostream& os, std::span<const double> v) {
  std::vector<char> buf(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v[i]));
    std::memcpy(buf.data() + 8 * i, &bits, 8);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void get_doubles(std::istream& is, std::span<double> v) {
  std::vector<char> buf(v.size() * 8);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) throw FormatError("checkpoint payload truncated");
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, buf.data() + 8 * i, 8);
    v[i] = std::bit_cast<double>(to_le(bits));
  }
}

template <class T, std::size_t N>
std::array<T, N> to_array(const ordered_json& j) {
  if (!j.is_array() || j.size() != N) throw FormatError("checkpoint lattice entry has wrong length");
  std::array<T, N> a{};
  for (std::size_t i = 0; i < N; ++i) a[i] = j[i].get<T>();
  return a;
}

ordered_json parse_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("checkpoint header missing");
  ordered_json h;
  try {
    h = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  if (!h.is_object() || h.value("format", "") != kFormat) throw FormatError("not an hsflow checkpoint");
  if (h.value("version", 0) != kVersion) throw FormatError("unsupported checkpoint version");
  return h;
}

}  // namespace

const Field& Checkpoint::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a.field;
  throw FormatError("checkpoint has no array '" + name + "'");
}

std::string checkpoint_header(const Checkpoint& ck) {
  ordered_json h;
  h["format"] = kFormat;
  h["version"] = kVersion;
  h["N"] = ck.lattice.n[0];
  h["L"] = ck.lattice.extent(0);
  h["backend"] = to_string(ck.backend);
  h["t"] = ck.t;
  h["chart"] = ck.chart;
  h["lattice"] = {{"n", ck.lattice.n},
                  {"h", ck.lattice.h},
                  {"origin", ck.lattice.origin},
                  {"periodic", ck.lattice.periodic}};
  ordered_json comps = ordered_json::array();
  for (const auto& a : ck.arrays) {
    if (!(a.field.lattice() == ck.lattice)) throw FormatError("array '" + a.name + "' lives on another lattice");
    comps.push_back({{"name", a.name}, {"components", a.field.components()}});
  }
  h["components"] = comps;
  h["extras"] = ck.extras;
  return h.dump();
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string header = checkpoint_header(ck);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os << header << '\n';
  for (const auto& a : ck.arrays) put_doubles(os, a.field.data());
  if (!os) throw Error("failed writing checkpoint: " + path.string());
}

nlohmann::ordered_json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  return parse_header(is);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  const ordered_json h = parse_header(is);
  Checkpoint ck;
  try {
    ck.t = h.at("t").get<double>();
    ck.backend = backend_from_string(h.at("backend").get<std::string>());
    ck.chart = h.at("chart").get<bool>();
    const auto& lat = h.at("lattice");
    ck.lattice.n = to_array<int, 4>(lat.at("n"));
    ck.lattice.h = to_array<double, 4>(lat.at("h"));
    ck.lattice.origin = to_array<double, 4>(lat.at("origin"));
    ck.lattice.periodic = to_array<bool, 4>(lat.at("periodic"));
    ck.extras = h.at("extras");
    for (const auto& c : h.at("components")) {
      const int count = c.at("components").get<int>();
      if (count <= 0) throw FormatError("component count must be positive");
      CheckpointArray a{c.at("name").get<std::string>(), Field(ck.lattice, count)};
      get_doubles(is, a.field.data());
      ck.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace hsflow
