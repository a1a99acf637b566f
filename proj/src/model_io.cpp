#include "cnnqoe/model_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cnnqoe {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'Q', 'O', 'E'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 * 4 + 1 + 8;

constexpr std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t n = 0; n < 256; ++n) {
        std::uint32_t c = n;
        for (int bit = 0; bit < 8; ++bit) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        table[n] = c;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw LoadError("truncated model file");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < size; ++i) c = kCrcTable[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

long long model_file_size(long long param_count) {
    return static_cast<long long>(kHeaderBytes) + 8 * param_count + 4;
}

std::vector<std::uint8_t> serialize_model(const Model& model) {
    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(model_file_size(count_params(model))));
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put_u16(out, kModelFormatVersion);
    const auto& c = model.config;
    put_u32(out, static_cast<std::uint32_t>(c.filter_width));
    put_u32(out, static_cast<std::uint32_t>(c.num_blocks));
    put_u32(out, static_cast<std::uint32_t>(c.filters));
    put_u32(out, static_cast<std::uint32_t>(c.in_channels));
    out.push_back(static_cast<std::uint8_t>(c.variant));
    put_f64(out, c.dropout_p);
    for (const auto* buffer : param_buffers(model))
        for (double v : *buffer) put_f64(out, v);
    put_u32(out, crc32(out.data(), out.size()));
    return out;
}

Model deserialize_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderBytes + 4) throw LoadError("truncated model file");
    Reader r{bytes};
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw LoadError("not a model file (bad magic)");
    r.pos = kMagic.size();
    const auto version = r.u16();
    if (version != kModelFormatVersion)
        throw LoadError("unsupported model format version " + std::to_string(version));

    ModelConfig config;
    config.filter_width = static_cast<int>(r.u32());
    config.num_blocks = static_cast<int>(r.u32());
    config.filters = static_cast<int>(r.u32());
    config.in_channels = static_cast<int>(r.u32());
    const auto variant_code = r.u8();
    if (variant_code > 1) throw LoadError("unknown variant code in model file");
    config.variant = static_cast<Variant>(variant_code);
    config.dropout_p = r.f64();

    for (const auto& violation : validate_config(config))
        if (!violation.overridable) throw LoadError("model file config invalid: " + violation.message);

    // checksum before any sizeable allocation
    const std::uint32_t stored = [&] {
        Reader tail{bytes};
        tail.pos = bytes.size() - 4;
        return tail.u32();
    }();
    if (crc32(bytes.data(), bytes.size() - 4) != stored)
        throw LoadError("model file checksum mismatch");

    Model model = model_skeleton(config);
    const long long params = count_params(model);
    if (static_cast<long long>(bytes.size()) != model_file_size(params))
        throw LoadError("truncated model file");

    for (auto& ref : param_refs(model))
        for (double& v : *ref.values) {
            v = r.f64();
            if (!std::isfinite(v)) throw LoadError("model file holds a non-finite parameter");
        }
    return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw LoadError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace cnnqoe
