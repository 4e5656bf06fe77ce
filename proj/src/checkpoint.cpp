#include "mcl/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mcl/errors.hpp"

namespace mcl {

namespace {
constexpr const char* kMagic = "mcl-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& out, const NamedTensors& tensors) {
  out << kMagic << ' ' << kVersion << '\n' << "tensors " << tensors.size() << '\n';
  char buf[64];
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw IoError("checkpoint tensor names must be non-empty without whitespace");
    }
    out << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", t[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
}

void save_checkpoint_file(const std::string& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  save_checkpoint(out, tensors);
  if (!out) throw IoError("failed writing " + path);
}

NamedTensors load_checkpoint(std::istream& in) {
  std::string magic, word;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw IoError("not an mcl checkpoint");
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  if (!(in >> word >> count) || word != "tensors") throw IoError("malformed checkpoint header");

  NamedTensors out;
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank)) throw IoError("truncated checkpoint");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      if (!(in >> d)) throw IoError("truncated checkpoint shape");
      total *= d;
    }
    std::vector<double> values(total);
    for (double& v : values) {
      if (!(in >> word)) throw IoError("truncated checkpoint values for " + name);
      char* end = nullptr;
      v = std::strtod(word.c_str(), &end);
      if (end == word.c_str() || *end != '\0') throw IoError("bad value in checkpoint: " + word);
    }
    out.emplace_back(name, Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

NamedTensors load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace mcl
