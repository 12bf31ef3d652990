#include "micacl/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "micacl/errors.hpp"

namespace micacl {

namespace {

constexpr char kMagic[4] = {'M', 'I', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct ArrayEntry {
    std::vector<int> shape;
    std::vector<float> data;
};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_array(std::string& out, const std::string& name, const std::vector<int>& shape,
               const std::vector<float>& data) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float f : data) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
}

struct ByteReader {
    const std::string& buf;
    std::uint64_t pos = 0;

    std::uint32_t u32(const char* what) {
        if (pos + 4 > buf.size())
            throw FormatError(std::string("mick: truncated while reading ") + what, pos);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }

    std::string bytes(std::size_t n, const char* what) {
        if (pos + n > buf.size())
            throw FormatError(std::string("mick: truncated while reading ") + what, pos);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::vector<float> scalar_f(double v) { return {static_cast<float>(v)}; }

double require_scalar(const std::map<std::string, ArrayEntry>& arrays, const std::string& name) {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("mick: missing entry '" + name + "'", 0);
    if (it->second.data.size() != 1)
        throw FormatError("mick: entry '" + name + "' is not a scalar", 0);
    return static_cast<double>(it->second.data[0]);
}

}  // namespace

void write_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params) {
    std::string body;
    std::vector<std::pair<std::string, ArrayEntry>> entries;

    auto add_scalar = [&](const std::string& name, double v) {
        entries.push_back({name, {{1}, scalar_f(v)}});
    };
    add_scalar("config.C_in", cfg.C_in);
    add_scalar("config.C", cfg.C);
    add_scalar("config.d", cfg.d);
    add_scalar("config.C_h", cfg.C_h);
    add_scalar("config.E", cfg.E);
    add_scalar("config.n_heads", cfg.n_heads);
    add_scalar("config.K", cfg.K);
    add_scalar("config.T", cfg.T);
    add_scalar("config.tau0", cfg.tau0);
    add_scalar("config.log_form", cfg.log_form ? 1 : 0);
    add_scalar("config.encoder_hidden", cfg.encoder_hidden);
    add_scalar("config.epochs", cfg.epochs);
    add_scalar("config.batch_size", cfg.batch_size);
    {
        const std::vector<int> scales = cfg.effective_scales();
        ArrayEntry e;
        e.shape = {static_cast<int>(scales.size())};
        for (int s : scales) e.data.push_back(static_cast<float>(s));
        entries.push_back({"config.scales", std::move(e)});
    }

    for (const auto& [name, p] : params.named_parameters()) {
        ArrayEntry e;
        e.shape = p.shape().empty() ? std::vector<int>{1} : p.shape();
        e.data.reserve(p.values().size());
        for (double v : p.values()) e.data.push_back(static_cast<float>(v));
        entries.push_back({name, std::move(e)});
    }

    for (const auto& [name, e] : entries) put_array(body, name, e.shape, e.data);

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    out += body;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("mick: cannot open '" + path + "' for writing", 0);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("mick: short write to '" + path + "'", out.size());
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("mick: cannot open '" + path + "'", 0);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    ByteReader r{buf};
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError("mick: bad magic", 0);
    r.pos = 4;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("mick: unsupported version " + std::to_string(version), 4);
    const std::uint32_t count = r.u32("array count");

    std::map<std::string, ArrayEntry> arrays;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32("name length");
        const std::string name = r.bytes(name_len, "array name");
        const std::uint32_t ndim = r.u32("rank");
        ArrayEntry e;
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = r.u32("dimension");
            if (dim == 0) throw FormatError("mick: zero dimension in '" + name + "'", r.pos - 4);
            e.shape.push_back(static_cast<int>(dim));
            n *= dim;
        }
        e.data.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::uint32_t bits = r.u32("array data");
            std::memcpy(&e.data[k], &bits, 4);
        }
        if (!arrays.emplace(name, std::move(e)).second)
            throw FormatError("mick: duplicate entry '" + name + "'", r.pos);
    }
    if (r.pos != buf.size())
        throw FormatError("mick: " + std::to_string(buf.size() - r.pos) + " trailing bytes", r.pos);

    Checkpoint ck;
    ModelConfig& cfg = ck.config;
    cfg.C_in = static_cast<int>(require_scalar(arrays, "config.C_in"));
    cfg.C = static_cast<int>(require_scalar(arrays, "config.C"));
    cfg.d = static_cast<int>(require_scalar(arrays, "config.d"));
    cfg.C_h = static_cast<int>(require_scalar(arrays, "config.C_h"));
    cfg.E = static_cast<int>(require_scalar(arrays, "config.E"));
    cfg.n_heads = static_cast<int>(require_scalar(arrays, "config.n_heads"));
    cfg.K = static_cast<int>(require_scalar(arrays, "config.K"));
    cfg.T = static_cast<int>(require_scalar(arrays, "config.T"));
    cfg.tau0 = require_scalar(arrays, "config.tau0");
    cfg.log_form = require_scalar(arrays, "config.log_form") != 0.0;
    cfg.encoder_hidden = static_cast<int>(require_scalar(arrays, "config.encoder_hidden"));
    cfg.epochs = static_cast<int>(require_scalar(arrays, "config.epochs"));
    cfg.batch_size = static_cast<int>(require_scalar(arrays, "config.batch_size"));
    {
        const auto it = arrays.find("config.scales");
        if (it == arrays.end()) throw FormatError("mick: missing entry 'config.scales'", 0);
        cfg.scales.clear();
        for (float v : it->second.data) cfg.scales.push_back(static_cast<int>(v));
    }
    cfg.validate();

    Rng throwaway(0);  // shapes only; every value is overwritten below
    ck.params = ModelParams::init(cfg, throwaway);
    for (const auto& [name, p] : ck.params.named_parameters()) {
        const auto it = arrays.find(name);
        if (it == arrays.end()) throw FormatError("mick: missing parameter '" + name + "'", 0);
        const std::vector<int> expect = p.shape().empty() ? std::vector<int>{1} : p.shape();
        if (it->second.shape != expect)
            throw FormatError("mick: parameter '" + name + "' has shape " +
                                  shape_str(it->second.shape) + ", expected " + shape_str(expect),
                              0);
        Tensor t = p;
        auto& vals = t.mutable_values();
        for (std::size_t k = 0; k < vals.size(); ++k)
            vals[k] = static_cast<double>(it->second.data[k]);
    }
    return ck;
}

}  // namespace micacl
