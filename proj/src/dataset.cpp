#include "vcsr/dataset.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vcsr {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const std::vector<uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back(kAlphabet[v & 63]);
    }
    const size_t rest = bytes.size() - i;
    if (rest == 1) {
        const uint32_t v = bytes[i] << 16;
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw std::runtime_error("base64: length must be a multiple of 4");
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw std::runtime_error("base64: bad padding");
                vals[j] = 0;
                ++pad;
            } else {
                if (pad > 0) throw std::runtime_error("base64: data after padding");
                vals[j] = decode_char(c);
                if (vals[j] < 0)
                    throw std::runtime_error(std::string("base64: invalid character '") + c + "'");
            }
        }
        const uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back((v >> 16) & 0xff);
        if (pad < 2) out.push_back((v >> 8) & 0xff);
        if (pad < 1) out.push_back(v & 0xff);
    }
    return out;
}

std::string encode_f32(const Tensor& t) {
    std::vector<uint8_t> bytes;
    bytes.reserve(static_cast<size_t>(t.numel()) * 4);
    for (double v : t.values()) {
        const uint32_t u = std::bit_cast<uint32_t>(static_cast<float>(v));
        bytes.push_back(u & 0xff);
        bytes.push_back((u >> 8) & 0xff);
        bytes.push_back((u >> 16) & 0xff);
        bytes.push_back((u >> 24) & 0xff);
    }
    return base64_encode(bytes);
}

namespace {

Tensor decode_f32(const json& field, const std::string& what) {
    if (!field.is_object() || !field.contains("shape") || !field.contains("data"))
        throw std::runtime_error(what + ": tensor field needs shape and data");
    Shape shape;
    for (const auto& d : field["shape"]) shape.push_back(d.get<int>());
    const std::vector<uint8_t> bytes = base64_decode(field["data"].get<std::string>());
    const int64_t n = numel_of(shape);
    if (static_cast<int64_t>(bytes.size()) != n * 4)
        throw std::runtime_error(what + ": payload holds " + std::to_string(bytes.size() / 4) +
                                 " floats, shape wants " + std::to_string(n));
    std::vector<double> values(n);
    for (int64_t i = 0; i < n; ++i) {
        const uint32_t u = static_cast<uint32_t>(bytes[i * 4]) |
                           (static_cast<uint32_t>(bytes[i * 4 + 1]) << 8) |
                           (static_cast<uint32_t>(bytes[i * 4 + 2]) << 16) |
                           (static_cast<uint32_t>(bytes[i * 4 + 3]) << 24);
        values[i] = std::bit_cast<float>(u);
    }
    return Tensor::from_data(std::move(shape), std::move(values));
}

json sample_to_json(const SyntheticSample& s) {
    json rec;
    rec["frames"] = {{"shape", {s.frames.dim(0), s.frames.dim(1)}}, {"data", encode_f32(s.frames)}};
    rec["question_tokens"] = s.question_tokens;
    rec["candidate_tokens"] = s.candidate_tokens;
    rec["answer_index"] = s.answer_index;
    rec["answer_id"] = s.answer_id;
    rec["causal_begin"] = s.causal_begin;
    rec["causal_end"] = s.causal_end;
    rec["conf_begin"] = s.conf_begin;
    rec["conf_end"] = s.conf_end;
    rec["family"] = s.family;
    rec["answer"] = s.answer;
    rec["conf_label"] = s.conf_label;
    rec["video_id"] = s.video_id;
    return rec;
}

SyntheticSample sample_from_json(const json& rec, const std::string& what) {
    SyntheticSample s;
    s.frames = decode_f32(rec.at("frames"), what);
    s.question_tokens = rec.at("question_tokens").get<std::vector<int>>();
    s.candidate_tokens = rec.at("candidate_tokens").get<std::vector<int>>();
    s.answer_index = rec.at("answer_index").get<int>();
    s.answer_id = rec.at("answer_id").get<int>();
    s.causal_begin = rec.at("causal_begin").get<int>();
    s.causal_end = rec.at("causal_end").get<int>();
    s.conf_begin = rec.at("conf_begin").get<int>();
    s.conf_end = rec.at("conf_end").get<int>();
    s.family = rec.at("family").get<int>();
    s.answer = rec.at("answer").get<int>();
    s.conf_label = rec.at("conf_label").get<int>();
    s.video_id = rec.at("video_id").get<uint64_t>();
    return s;
}

}  // namespace

void save_dataset(const std::string& path, const DatasetHeader& header,
                  const std::vector<SyntheticSample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset file " + path);
    json head;
    head["format_version"] = header.format_version;
    head["d_in"] = header.d_in;
    head["n_frames"] = header.n_frames;
    head["mode"] = header.mode;
    head["vocab_size"] = header.vocab_size;
    out << head.dump() << "\n";
    for (const auto& s : samples) out << sample_to_json(s).dump() << "\n";
    if (!out) throw std::runtime_error("write failed for dataset file " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty dataset file");
    Dataset ds;
    try {
        const json head = json::parse(line);
        ds.header.format_version = head.at("format_version").get<int>();
        ds.header.d_in = head.at("d_in").get<int>();
        ds.header.n_frames = head.at("n_frames").get<int>();
        ds.header.mode = head.at("mode").get<std::string>();
        ds.header.vocab_size = head.at("vocab_size").get<int>();
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": bad header line: " + e.what());
    }
    if (ds.header.format_version != 1)
        throw std::runtime_error(path + ": unsupported format version " +
                                 std::to_string(ds.header.format_version));
    if (ds.header.d_in < 1 || ds.header.n_frames < 1 || ds.header.vocab_size < 4 ||
        (ds.header.mode != "mc" && ds.header.mode != "open"))
        throw std::runtime_error(path + ": malformed header fields");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string what = path + " line " + std::to_string(line_no);
        try {
            ds.samples.push_back(sample_from_json(json::parse(line), what));
        } catch (const json::exception& e) {
            throw std::runtime_error(what + ": " + e.what());
        }
        const SyntheticSample& s = ds.samples.back();
        if (s.frames.dim(0) != ds.header.n_frames || s.frames.dim(1) != ds.header.d_in)
            throw std::runtime_error(what + ": frame shape disagrees with the header");
    }
    return ds;
}

DatasetHeader header_for(const GenSpec& spec) {
    DatasetHeader h;
    h.d_in = spec.d_in;
    h.n_frames = spec.n_frames;
    h.mode = spec.open_ended ? "open" : "mc";
    h.vocab_size = spec.vocab_size();
    return h;
}

}  // namespace vcsr
