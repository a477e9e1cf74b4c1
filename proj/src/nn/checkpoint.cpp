#include "trailgrade/nn/checkpoint.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "trailgrade/binary_io.hpp"

namespace trailgrade::nn {

namespace {

constexpr std::string_view kMagic = "TGM1";
constexpr std::uint8_t kVersion = 1;

void put_config(io::ByteWriter& w, const ModelConfig& c) {
    w.put(static_cast<std::uint32_t>(c.window_points));
    w.put(static_cast<std::uint32_t>(c.kernel_len));
    for (auto f : c.filters) w.put(static_cast<std::uint32_t>(f));
    w.put(static_cast<std::uint32_t>(c.dense_units));
    w.put(static_cast<std::uint32_t>(c.classes));
    w.put(c.dropout_rate);
    w.put(c.l2_coeff);
    w.put(c.bn_momentum);
    w.put(c.bn_epsilon);
}

ModelConfig get_config(io::ByteReader& r) {
    ModelConfig c;
    c.window_points = r.get<std::uint32_t>();
    c.kernel_len = r.get<std::uint32_t>();
    for (auto& f : c.filters) f = r.get<std::uint32_t>();
    c.dense_units = r.get<std::uint32_t>();
    c.classes = r.get<std::uint32_t>();
    c.dropout_rate = r.get<double>();
    c.l2_coeff = r.get<double>();
    c.bn_momentum = r.get<double>();
    c.bn_epsilon = r.get<double>();
    return c;
}

// Lower bound on the tensor payload a config implies, in long double so that
// absurd (corrupted) dimensions cannot overflow.
long double min_payload_bytes(const ModelConfig& c) {
    long double values = 0.0L, in = 3.0L, len = static_cast<long double>(c.window_points);
    for (auto f : c.filters) {
        values += static_cast<long double>(c.kernel_len) * 2.0L * in * f + 5.0L * f;
        in = static_cast<long double>(f);
        len = std::ceil(len / 2.0L);
    }
    const long double flat = len * 4.0L * in;
    values += flat * c.dense_units + c.dense_units + static_cast<long double>(c.dense_units) * c.classes + c.classes;
    return values * sizeof(float);
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
    io::ByteWriter w;
    w.put_bytes(kMagic);
    w.put(kVersion);
    put_config(w, params.config);
    const auto tensors = params.stored();
    w.put(static_cast<std::uint32_t>(tensors.size()));
    for (const auto* t : tensors) {
        w.put(static_cast<std::uint8_t>(t->rank()));
        for (auto d : t->shape()) w.put(static_cast<std::uint32_t>(d));
        for (double v : t->values()) w.put(static_cast<float>(v));
    }
    return w.bytes();
}

ModelParams decode_checkpoint(std::string_view bytes) {
    io::ByteReader r(bytes, Errc::CorruptCheckpoint);
    if (r.get_bytes(kMagic.size()) != kMagic) throw Error(Errc::VersionMismatch, "not a model checkpoint");
    if (const auto v = r.get<std::uint8_t>(); v != kVersion) {
        throw Error(Errc::VersionMismatch, "checkpoint format version " + std::to_string(v));
    }
    const ModelConfig config = get_config(r);
    try {
        config.validate();
    } catch (const Error& e) {
        throw Error(Errc::CorruptCheckpoint, std::string("invalid stored config: ") + e.what());
    }
    if (min_payload_bytes(config) > static_cast<long double>(r.remaining())) {
        throw Error(Errc::CorruptCheckpoint, "file too short for its stored config");
    }
    // Shapes come from the config; the stored headers must agree with them.
    Rng rng(0);
    ModelParams params = build_model(config, rng);
    auto tensors = params.stored();
    if (r.get<std::uint32_t>() != tensors.size()) throw Error(Errc::CorruptCheckpoint, "unexpected tensor count");
    for (auto* t : tensors) {
        const auto rank = r.get<std::uint8_t>();
        Shape shape(rank);
        for (auto& d : shape) d = r.get<std::uint32_t>();
        if (shape != t->shape()) {
            throw Error(Errc::CorruptCheckpoint, "tensor shape " + shape_string(shape) + " does not match config " +
                                                     shape_string(t->shape()));
        }
        for (auto& v : t->values()) {
            v = static_cast<double>(r.get<float>());
            if (!std::isfinite(v)) throw Error(Errc::CorruptCheckpoint, "non-finite parameter value");
        }
    }
    if (!r.at_end()) throw Error(Errc::CorruptCheckpoint, "trailing bytes after last tensor");
    for (const auto& bn : params.bn) {
        for (double v : bn.running_var.values()) {
            if (v < 0.0) throw Error(Errc::CorruptCheckpoint, "negative running variance");
        }
    }
    return params;
}

std::string describe_config(const ModelConfig& c) {
    std::ostringstream s;
    s.precision(std::numeric_limits<double>::max_digits10);
    s << "format=TGM1\n"
      << "window_points=" << c.window_points << "\n"
      << "kernel_len=" << c.kernel_len << "\n"
      << "filters=" << c.filters[0] << "," << c.filters[1] << "," << c.filters[2] << "\n"
      << "dense_units=" << c.dense_units << "\n"
      << "classes=" << c.classes << "\n"
      << "dropout_rate=" << c.dropout_rate << "\n"
      << "l2_coeff=" << c.l2_coeff << "\n"
      << "bn_momentum=" << c.bn_momentum << "\n"
      << "bn_epsilon=" << c.bn_epsilon << "\n";
    return s.str();
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    io::write_file(path, encode_checkpoint(params));
    auto sidecar = path;
    sidecar += ".txt";
    io::write_file(sidecar, describe_config(params.config));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path));
}

}  // namespace trailgrade::nn
