#include "topo/array.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "topo/common.hpp"

namespace topo {

static_assert(std::endian::native == std::endian::little,
              "NPY I/O here assumes a little-endian host");

Array::Array(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(shape_numel(shape), 0.0);
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) {
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += std::to_string(shape[i]);
  }
  out += ")";
  return out;
}

namespace {

std::string npy_shape_tuple(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out += std::to_string(shape[i]);
    if (i + 1 < shape.size() || shape.size() == 1) {
      out += ",";
    }
    if (i + 1 < shape.size()) {
      out += " ";
    }
  }
  out += ")";
  return out;
}

}  // namespace

void save_npy(const std::filesystem::path& path, const Array& array) {
  if (array.data.size() != shape_numel(array.shape)) {
    throw Error("save_npy: data size does not match shape " + shape_to_string(array.shape));
  }
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " +
                       npy_shape_tuple(array.shape) + ", }";
  // Magic (6) + version (2) + header length (2) + header, padded to 64 bytes.
  const std::size_t unpadded = 10 + header.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  header.append(padded - unpadded, ' ');
  header += '\n';
  if (header.size() > 65535) {
    throw Error("save_npy: header too large");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("save_npy: cannot open " + path.string());
  }
  out.write("\x93NUMPY\x01\x00", 8);
  const std::uint16_t header_len = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&header_len), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(array.data.data()),
            static_cast<std::streamsize>(array.data.size() * sizeof(double)));
  if (!out) {
    throw Error("save_npy: write failed for " + path.string());
  }
}

namespace {

// Pulls the value of a quoted or bare python-literal dict entry out of the
// NPY header. The header grammar is fixed by the format definition, so simple
// string scanning is enough.
std::string header_field(const std::string& header, const std::string& key,
                         const std::filesystem::path& path) {
  const std::string quoted = "'" + key + "'";
  const std::size_t at = header.find(quoted);
  if (at == std::string::npos) {
    throw Error("load_npy: header of " + path.string() + " lacks key " + key);
  }
  std::size_t colon = header.find(':', at);
  if (colon == std::string::npos) {
    throw Error("load_npy: malformed header in " + path.string());
  }
  std::size_t start = colon + 1;
  while (start < header.size() && header[start] == ' ') {
    ++start;
  }
  std::size_t end = start;
  if (header[start] == '\'') {
    end = header.find('\'', start + 1);
    if (end == std::string::npos) {
      throw Error("load_npy: malformed header in " + path.string());
    }
    return header.substr(start + 1, end - start - 1);
  }
  if (header[start] == '(') {
    end = header.find(')', start);
    if (end == std::string::npos) {
      throw Error("load_npy: malformed header in " + path.string());
    }
    return header.substr(start, end - start + 1);
  }
  while (end < header.size() && header[end] != ',' && header[end] != '}') {
    ++end;
  }
  return header.substr(start, end - start);
}

std::vector<std::size_t> parse_shape_tuple(const std::string& text,
                                           const std::filesystem::path& path) {
  std::vector<std::size_t> shape;
  std::string digits;
  for (const char c : text) {
    if (c >= '0' && c <= '9') {
      digits += c;
    } else if (!digits.empty()) {
      shape.push_back(std::stoull(digits));
      digits.clear();
    } else if (c != '(' && c != ')' && c != ',' && c != ' ') {
      throw Error("load_npy: bad shape tuple in " + path.string());
    }
  }
  if (!digits.empty()) {
    shape.push_back(std::stoull(digits));
  }
  return shape;
}

}  // namespace

Array load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("load_npy: cannot open " + path.string());
  }
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) {
    throw Error("load_npy: " + path.string() + " is not an NPY file");
  }
  const int version_major = magic[6];
  std::uint32_t header_len = 0;
  if (version_major == 1) {
    std::uint16_t len16 = 0;
    in.read(reinterpret_cast<char*>(&len16), 2);
    header_len = len16;
  } else if (version_major == 2) {
    in.read(reinterpret_cast<char*>(&header_len), 4);
  } else {
    throw Error("load_npy: unsupported NPY version in " + path.string());
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) {
    throw Error("load_npy: truncated header in " + path.string());
  }

  const std::string descr = header_field(header, "descr", path);
  if (descr != "<f8") {
    throw Error("load_npy: " + path.string() + " has dtype " + descr + ", expected <f8");
  }
  const std::string order = header_field(header, "fortran_order", path);
  if (order != "False") {
    throw Error("load_npy: " + path.string() + " is Fortran-ordered, expected C order");
  }

  Array array;
  array.shape = parse_shape_tuple(header_field(header, "shape", path), path);
  array.data.resize(shape_numel(array.shape));
  in.read(reinterpret_cast<char*>(array.data.data()),
          static_cast<std::streamsize>(array.data.size() * sizeof(double)));
  if (!in) {
    throw Error("load_npy: truncated data in " + path.string());
  }
  return array;
}

}  // namespace topo
