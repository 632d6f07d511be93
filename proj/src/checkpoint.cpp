#include "vcsr/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vcsr {

namespace {

constexpr char kMagic[] = "vcsr-checkpoint-v1";

std::vector<uint8_t> f32le_bytes(const std::vector<double>& values) {
    std::vector<uint8_t> bytes;
    bytes.reserve(values.size() * 4);
    for (double v : values) {
        const uint32_t u = std::bit_cast<uint32_t>(static_cast<float>(v));
        bytes.push_back(u & 0xff);
        bytes.push_back((u >> 8) & 0xff);
        bytes.push_back((u >> 16) & 0xff);
        bytes.push_back((u >> 24) & 0xff);
    }
    return bytes;
}

std::vector<double> f32le_values(const uint8_t* bytes, size_t count) {
    std::vector<double> values(count);
    for (size_t i = 0; i < count; ++i) {
        const uint32_t u = static_cast<uint32_t>(bytes[i * 4]) |
                           (static_cast<uint32_t>(bytes[i * 4 + 1]) << 8) |
                           (static_cast<uint32_t>(bytes[i * 4 + 2]) << 16) |
                           (static_cast<uint32_t>(bytes[i * 4 + 3]) << 24);
        values[i] = std::bit_cast<float>(u);
    }
    return values;
}

std::string shape_token(const Shape& shape) {
    if (shape.empty()) return "scalar";
    std::string out;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(shape[i]);
    }
    return out;
}

Shape parse_shape_token(const std::string& token, const std::string& where) {
    if (token == "scalar") return {};
    Shape shape;
    size_t pos = 0;
    while (pos < token.size()) {
        size_t next = token.find('x', pos);
        if (next == std::string::npos) next = token.size();
        try {
            shape.push_back(std::stoi(token.substr(pos, next - pos)));
        } catch (const std::exception&) {
            throw std::runtime_error(where + ": bad shape token '" + token + "'");
        }
        pos = next + 1;
    }
    return shape;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

uint64_t fnv1a64(const std::vector<uint8_t>& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

void save_checkpoint(const std::string& path, const TrainConfig& config,
                     const ParamStore& params) {
    std::ostringstream header;
    header << kMagic << "\n[config]\n";
    config.save(header);
    header << "[manifest]\n";
    std::vector<uint8_t> payload;
    for (const auto& [name, tensor] : params.entries()) {
        const std::vector<uint8_t> bytes =
            f32le_bytes({tensor.values().begin(), tensor.values().end()});
        header << name << " shape=" << shape_token(tensor.shape()) << " offset=" << payload.size()
               << " bytes=" << bytes.size() << " checksum=" << hex64(fnv1a64(bytes)) << "\n";
        payload.insert(payload.end(), bytes.begin(), bytes.end());
    }
    header << "[payload] " << payload.size() << "\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint file " + path);
    const std::string head = header.str();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("write failed for checkpoint file " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint file " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw std::runtime_error(path + ": not a checkpoint file");
    if (!std::getline(in, line) || line != "[config]")
        throw std::runtime_error(path + ": missing [config] section");

    Checkpoint ckpt;
    while (std::getline(in, line) && line != "[manifest]") {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ": bad config line '" + line + "'");
        ckpt.config.set(line.substr(0, eq), line.substr(eq + 1));
    }
    if (line != "[manifest]") throw std::runtime_error(path + ": missing [manifest] section");

    struct Entry {
        std::string name;
        Shape shape;
        size_t offset = 0, bytes = 0;
        uint64_t checksum = 0;
    };
    std::vector<Entry> entries;
    size_t payload_size = 0;
    while (std::getline(in, line)) {
        if (line.rfind("[payload] ", 0) == 0) {
            payload_size = std::stoull(line.substr(10));
            break;
        }
        std::istringstream fields(line);
        Entry e;
        std::string shape_f, offset_f, bytes_f, checksum_f;
        if (!(fields >> e.name >> shape_f >> offset_f >> bytes_f >> checksum_f))
            throw std::runtime_error(path + ": bad manifest line '" + line + "'");
        auto strip = [&](const std::string& field, const char* prefix) {
            const std::string p(prefix);
            if (field.rfind(p, 0) != 0)
                throw std::runtime_error(path + ": expected '" + p + "' in '" + field + "'");
            return field.substr(p.size());
        };
        e.shape = parse_shape_token(strip(shape_f, "shape="), path);
        e.offset = std::stoull(strip(offset_f, "offset="));
        e.bytes = std::stoull(strip(bytes_f, "bytes="));
        e.checksum = std::stoull(strip(checksum_f, "checksum="), nullptr, 16);
        entries.push_back(std::move(e));
    }
    if (line.rfind("[payload] ", 0) != 0)
        throw std::runtime_error(path + ": missing [payload] section");

    std::vector<uint8_t> payload(payload_size);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_size));
    if (static_cast<size_t>(in.gcount()) != payload_size)
        throw std::runtime_error(path + ": truncated payload");

    for (const Entry& e : entries) {
        if (e.offset + e.bytes > payload_size || e.bytes % 4 != 0)
            throw std::runtime_error(path + ": manifest entry " + e.name +
                                     " points outside the payload");
        const std::vector<uint8_t> slice(payload.begin() + static_cast<long>(e.offset),
                                         payload.begin() + static_cast<long>(e.offset + e.bytes));
        if (fnv1a64(slice) != e.checksum)
            throw std::runtime_error(path + ": checksum mismatch for " + e.name);
        ParamBlob blob;
        blob.name = e.name;
        blob.shape = e.shape;
        blob.values = f32le_values(slice.data(), e.bytes / 4);
        if (static_cast<int64_t>(blob.values.size()) != numel_of(blob.shape))
            throw std::runtime_error(path + ": size/shape mismatch for " + e.name);
        ckpt.blobs.push_back(std::move(blob));
    }
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParamStore& params) {
    if (ckpt.blobs.size() != params.entries().size())
        throw std::runtime_error("checkpoint holds " + std::to_string(ckpt.blobs.size()) +
                                 " tensors, model has " +
                                 std::to_string(params.entries().size()));
    for (const ParamBlob& blob : ckpt.blobs) {
        if (!params.has(blob.name))
            throw std::runtime_error("checkpoint tensor " + blob.name + " not in the model");
        Tensor t = params.get(blob.name);
        if (t.shape() != blob.shape)
            throw std::runtime_error("checkpoint tensor " + blob.name + " has shape " +
                                     shape_str(blob.shape) + ", model wants " +
                                     shape_str(t.shape()));
        auto& value = t.mutable_values();
        std::copy(blob.values.begin(), blob.values.end(), value.begin());
    }
}

}  // namespace vcsr
