#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace gpswarm::binio {

// Little helpers for the versioned flat containers (4-byte magic, u32
// version, then raw native-endian fields).

class Writer {
 public:
  Writer(const std::filesystem::path& path, const char (&magic)[5], std::uint32_t version)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out_.write(magic, 4);
    put(version);
  }
  template <class T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(const double* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path, const char (&magic)[5], std::uint32_t version)
      : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path.string());
    std::array<char, 4> m{};
    in_.read(m.data(), 4);
    if (!in_ || std::memcmp(m.data(), magic, 4) != 0)
      throw std::runtime_error(path.string() + ": bad magic");
    if (get<std::uint32_t>() != version)
      throw std::runtime_error(path.string() + ": unsupported version");
  }
  template <class T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw std::runtime_error("truncated file");
    return v;
  }
  void get_doubles(double* p, std::size_t n) {
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw std::runtime_error("truncated file");
  }

 private:
  std::ifstream in_;
};

}  // namespace gpswarm::binio
