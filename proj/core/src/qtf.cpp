#include "qks/qtf.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "qks/errors.hpp"

namespace qks {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'F', '1'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename U>
U byte_reverse(U v) {
    U out;
    const auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
}

template <typename U>
U to_little(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        return byte_reverse(v);
    } else {
        return v;
    }
}

template <typename T>
void swap_payload_if_needed(std::vector<T>& data) {
    if constexpr (std::endian::native == std::endian::big) {
        for (T& v : data) v = byte_reverse(v);
    }
}

template <typename T>
void write_impl(const std::filesystem::path& path, const Tensor<T>& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    const std::uint8_t dtype = static_cast<std::uint8_t>(dtype_of<T>::value);
    const std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
    const std::uint16_t reserved = 0;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    out.write(reinterpret_cast<const char*>(&reserved), 2);
    for (std::size_t ext : t.shape()) {
        const std::uint64_t dim = to_little(static_cast<std::uint64_t>(ext));
        out.write(reinterpret_cast<const char*>(&dim), 8);
    }
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(T));
    } else {
        std::vector<T> payload(t.values());
        swap_payload_if_needed(payload);
        out.write(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(T));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

struct RawHeader {
    Dtype dtype;
    std::vector<std::size_t> dims;
    std::size_t numel;
};

RawHeader read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("format error: bad magic in " + path.string());
    }
    std::uint8_t dtype_code = 0, rank = 0;
    std::uint16_t reserved = 1;
    in.read(reinterpret_cast<char*>(&dtype_code), 1);
    in.read(reinterpret_cast<char*>(&rank), 1);
    in.read(reinterpret_cast<char*>(&reserved), 2);
    if (!in) throw DataError("format error: truncated header in " + path.string());
    if (dtype_code != 1 && dtype_code != 2) {
        throw DataError("version error: unknown dtype code " + std::to_string(dtype_code) + " in " +
                        path.string());
    }
    if (reserved != 0) {
        throw DataError("format error: nonzero reserved field in " + path.string());
    }
    RawHeader h;
    h.dtype = static_cast<Dtype>(dtype_code);
    h.numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        std::uint64_t dim = 0;
        in.read(reinterpret_cast<char*>(&dim), 8);
        if (!in) throw DataError("format error: truncated dims in " + path.string());
        dim = to_little(dim);
        if (dim == 0) throw DataError("format error: zero extent in " + path.string());
        h.dims.push_back(static_cast<std::size_t>(dim));
        h.numel *= static_cast<std::size_t>(dim);
    }
    return h;
}

template <typename T>
Tensor<T> read_payload(std::ifstream& in, const RawHeader& h, const std::filesystem::path& path) {
    std::vector<T> data(h.numel);
    in.read(reinterpret_cast<char*>(data.data()), h.numel * sizeof(T));
    if (static_cast<std::size_t>(in.gcount()) != h.numel * sizeof(T)) {
        throw DataError("corruption error: payload shorter than declared in " + path.string());
    }
    in.peek();
    if (!in.eof()) {
        throw DataError("corruption error: trailing bytes after payload in " + path.string());
    }
    swap_payload_if_needed(data);
    return Tensor<T>(h.dims, std::move(data));
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tensor file: " + path.string());
    return in;
}

} // namespace

void write_tensor(const std::filesystem::path& path, const Tensor<float>& t) {
    write_impl(path, t);
}

void write_tensor(const std::filesystem::path& path, const Tensor<double>& t) {
    write_impl(path, t);
}

AnyTensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    const RawHeader h = read_header(in, path);
    if (h.dtype == Dtype::f32) return read_payload<float>(in, h, path);
    return read_payload<double>(in, h, path);
}

Tensor<float> read_tensor_f32(const std::filesystem::path& path) {
    AnyTensor t = read_tensor(path);
    if (auto* f = std::get_if<Tensor<float>>(&t)) return std::move(*f);
    throw DataError("expected float32 tensor in " + path.string());
}

Tensor<double> read_tensor_f64(const std::filesystem::path& path) {
    AnyTensor t = read_tensor(path);
    if (auto* d = std::get_if<Tensor<double>>(&t)) return std::move(*d);
    throw DataError("expected float64 tensor in " + path.string());
}

QtfHeader read_tensor_header(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    const RawHeader h = read_header(in, path);
    return QtfHeader{h.dtype, h.dims};
}

} // namespace qks
