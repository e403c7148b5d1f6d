#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "codemt/transformer.hpp"
#include "codemt/util.hpp"

#include <json.hpp>

namespace codemt {

// Checkpoint layout (little-endian):
//   magic "CMTCKPT1" | u32 version | u32 json_len | header json
//   | per parameter: f32 values, f32 adam_m, f32 adam_v
//   | u64 fnv-1a checksum of everything before it
// The header json carries {arch, config, step, rng_state, params:[{name,rows,cols}]}.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr const char* kCheckpointMagic = "CMTCKPT1";

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32(const std::string& buf, std::size_t& at) {
    if (at + 4 > buf.size()) throw CorruptCheckpoint("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + static_cast<std::size_t>(i)])) << (8 * i);
    at += 4;
    return v;
}
inline std::uint64_t get_u64(const std::string& buf, std::size_t& at) {
    if (at + 8 > buf.size()) throw CorruptCheckpoint("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + static_cast<std::size_t>(i)])) << (8 * i);
    at += 8;
    return v;
}

template <class S>
void put_matrix(std::string& buf, const Mat<S>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            float f = static_cast<float>(m(r, c));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(buf, bits);
        }
    }
}

template <class S>
void get_matrix(const std::string& buf, std::size_t& at, Mat<S>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::uint32_t bits = get_u32(buf, at);
            float f;
            std::memcpy(&f, &bits, 4);
            m(r, c) = static_cast<S>(f);
        }
    }
}

}  // namespace detail

template <class S>
void save_checkpoint(const ModelState<S>& st, const std::string& path,
                     const nlohmann::json& provenance = {}) {
    nlohmann::json header;
    header["arch"] = st.arch;
    header["config"] = st.cfg.to_json();
    header["step"] = st.step;
    header["rng_state"] = st.rng_state;
    if (!provenance.is_null() && !provenance.empty()) header["provenance"] = provenance;
    header["params"] = nlohmann::json::array();
    for (std::size_t i = 0; i < st.names.size(); ++i) {
        header["params"].push_back({{"name", st.names[i]},
                                    {"rows", st.params[i].rows()},
                                    {"cols", st.params[i].cols()}});
    }
    std::string hj = header.dump();

    std::string buf;
    buf += kCheckpointMagic;
    detail::put_u32(buf, kCheckpointVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(hj.size()));
    buf += hj;
    for (std::size_t i = 0; i < st.params.size(); ++i) {
        detail::put_matrix(buf, st.params[i]);
        detail::put_matrix(buf, st.adam_m[i]);
        detail::put_matrix(buf, st.adam_v[i]);
    }
    detail::put_u64(buf, fnv1a64(buf));
    write_file(path, buf);
}

template <class S>
ModelState<S> load_checkpoint(const std::string& path) {
    std::string buf = read_file(path);
    if (buf.size() < 20 || buf.compare(0, 8, kCheckpointMagic) != 0) {
        throw CorruptCheckpoint("not a checkpoint file: " + path);
    }
    std::uint64_t stored_sum;
    {
        std::size_t at = buf.size() - 8;
        stored_sum = detail::get_u64(buf, at);
    }
    if (fnv1a64(std::string_view(buf.data(), buf.size() - 8)) != stored_sum) {
        throw CorruptCheckpoint("checksum mismatch: " + path);
    }
    std::size_t at = 8;
    std::uint32_t version = detail::get_u32(buf, at);
    if (version != kCheckpointVersion) {
        throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    std::uint32_t hlen = detail::get_u32(buf, at);
    if (at + hlen > buf.size()) throw CorruptCheckpoint("truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(at, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("bad header: ") + e.what());
    }
    at += hlen;

    ModelState<S> st;
    st.arch = header.at("arch").get<std::string>();
    st.cfg = ModelConfig::from_json(header.at("config"));
    st.step = header.at("step").get<std::int64_t>();
    st.rng_state = header.at("rng_state").get<std::uint64_t>();
    for (const auto& p : header.at("params")) {
        std::string name = p.at("name").get<std::string>();
        Eigen::Index rows = p.at("rows").get<Eigen::Index>();
        Eigen::Index cols = p.at("cols").get<Eigen::Index>();
        st.index.emplace(name, st.names.size());
        st.names.push_back(name);
        st.params.push_back(Mat<S>(rows, cols));
        st.adam_m.push_back(Mat<S>(rows, cols));
        st.adam_v.push_back(Mat<S>(rows, cols));
    }
    for (std::size_t i = 0; i < st.params.size(); ++i) {
        detail::get_matrix(buf, at, st.params[i]);
        detail::get_matrix(buf, at, st.adam_m[i]);
        detail::get_matrix(buf, at, st.adam_v[i]);
    }
    return st;
}

// Loads parameters from `path` into an existing model by name. Strict mode
// requires the name sets to match; partial mode loads the intersection and
// leaves everything else (e.g. freshly initialized cross-attention) as-is.
// Optimizer moments only transfer in strict mode.
template <class S>
int load_into(ModelState<S>& st, const std::string& path, bool partial) {
    ModelState<S> file = load_checkpoint<S>(path);
    int loaded = 0;
    for (std::size_t i = 0; i < file.names.size(); ++i) {
        const std::string& name = file.names[i];
        if (!st.has_param(name)) {
            if (!partial) throw ShapeError("checkpoint has unknown parameter: " + name);
            continue;
        }
        Mat<S>& dst = st.param(name);
        if (dst.rows() != file.params[i].rows() || dst.cols() != file.params[i].cols()) {
            throw ShapeError("parameter shape mismatch for " + name);
        }
        dst = file.params[i];
        if (!partial) {
            st.adam_m[st.param_id(name)] = file.adam_m[i];
            st.adam_v[st.param_id(name)] = file.adam_v[i];
        }
        ++loaded;
    }
    if (!partial) {
        if (loaded != static_cast<int>(st.params.size())) {
            throw ShapeError("checkpoint is missing parameters");
        }
        st.step = file.step;
        st.rng_state = file.rng_state;
    }
    return loaded;
}

}  // namespace codemt
