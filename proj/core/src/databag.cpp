#include "micacl/databag.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "micacl/errors.hpp"

namespace micacl {

namespace {

constexpr char kMagic[4] = {'M', 'I', 'B', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

struct ByteReader {
    const std::string& buf;
    std::uint64_t pos = 0;

    std::uint32_t u32(const char* what) {
        if (pos + 4 > buf.size())
            throw FormatError(std::string("mibg: truncated while reading ") + what, pos);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }

    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
};

}  // namespace

void DatasetSpec::validate() const {
    if (classes < 2) throw ConfigError("dataset spec: need at least 2 classes");
    if (instances < 1) throw ConfigError("dataset spec: instances per bag must be >= 1");
    if (feat_dim < 1) throw ConfigError("dataset spec: feature width must be >= 1");
    if (head_count < 1) throw ConfigError("dataset spec: head count must be >= 1");
    if (!(imbalance_ratio >= 1.0)) throw ConfigError("dataset spec: imbalance ratio must be >= 1");
    if (key_instances < 1 || key_instances > instances)
        throw ConfigError("dataset spec: key instances must lie in [1, T]");
    if (!(noise_sigma >= 0.0)) throw ConfigError("dataset spec: noise sigma must be >= 0");
    for (int c = 0; c < classes; ++c) {
        const double count = std::round(
            head_count * std::pow(imbalance_ratio, -static_cast<double>(c) / (classes - 1)));
        if (count < 1.0)
            throw ConfigError("dataset spec: class " + std::to_string(c) +
                              " count rounds to 0; lower the ratio or raise head count");
    }
}

std::vector<int> DatasetSpec::class_count_profile() const {
    validate();
    std::vector<int> counts(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c)
        counts[static_cast<std::size_t>(c)] = static_cast<int>(std::round(
            head_count * std::pow(imbalance_ratio, -static_cast<double>(c) / (classes - 1))));
    return counts;
}

Dataset gen_dataset(const DatasetSpec& spec) {
    const std::vector<int> counts = spec.class_count_profile();
    Rng rng(spec.seed);

    // Unit-norm class prototypes, drawn before any bag.
    std::vector<std::vector<double>> protos(static_cast<std::size_t>(spec.classes));
    for (auto& p : protos) {
        p.resize(static_cast<std::size_t>(spec.feat_dim));
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : p) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        for (auto& v : p) v /= norm;
    }

    Dataset ds;
    ds.classes = spec.classes;
    ds.instances = spec.instances;
    ds.feat_dim = spec.feat_dim;
    for (int c = 0; c < spec.classes; ++c) {
        const auto& proto = protos[static_cast<std::size_t>(c)];
        for (int b = 0; b < counts[static_cast<std::size_t>(c)]; ++b) {
            Bag bag;
            bag.label = c;
            bag.instances.assign(static_cast<std::size_t>(spec.instances * spec.feat_dim), 0.0);
            const std::vector<int> slots = rng.sample_indices(spec.instances, spec.key_instances);
            std::vector<char> is_key(static_cast<std::size_t>(spec.instances), 0);
            for (int s : slots) is_key[static_cast<std::size_t>(s)] = 1;
            for (int t = 0; t < spec.instances; ++t)
                for (int j = 0; j < spec.feat_dim; ++j) {
                    double v = spec.noise_sigma * rng.normal();
                    if (is_key[static_cast<std::size_t>(t)]) v += proto[static_cast<std::size_t>(j)];
                    bag.instances[static_cast<std::size_t>(t * spec.feat_dim + j)] = v;
                }
            ds.bags.push_back(std::move(bag));
        }
    }
    return ds;
}

std::vector<int> class_counts(const Dataset& ds) {
    if (ds.bags.empty()) throw ConfigError("class_counts: empty dataset");
    std::vector<int> counts(static_cast<std::size_t>(ds.classes), 0);
    for (const auto& bag : ds.bags) ++counts[static_cast<std::size_t>(bag.label)];
    return counts;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    std::string out;
    out.reserve(24 + ds.bags.size() * (4 + static_cast<std::size_t>(ds.instances * ds.feat_dim) * 4));
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(ds.bags.size()));
    put_u32(out, static_cast<std::uint32_t>(ds.classes));
    put_u32(out, static_cast<std::uint32_t>(ds.instances));
    put_u32(out, static_cast<std::uint32_t>(ds.feat_dim));
    for (const auto& bag : ds.bags) {
        put_u32(out, static_cast<std::uint32_t>(bag.label));
        for (double v : bag.instances) put_f32(out, static_cast<float>(v));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("mibg: cannot open '" + path + "' for writing", 0);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("mibg: short write to '" + path + "'", out.size());
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("mibg: cannot open '" + path + "'", 0);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    ByteReader r{buf};
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError("mibg: bad magic", 0);
    r.pos = 4;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("mibg: unsupported version " + std::to_string(version), 4);
    const std::uint32_t num_bags = r.u32("bag count");
    const std::uint32_t classes = r.u32("class count");
    const std::uint32_t instances = r.u32("instance count");
    const std::uint32_t feat_dim = r.u32("feature width");
    if (classes < 1 || instances < 1 || feat_dim < 1)
        throw FormatError("mibg: degenerate header fields", 12);

    Dataset ds;
    ds.classes = static_cast<int>(classes);
    ds.instances = static_cast<int>(instances);
    ds.feat_dim = static_cast<int>(feat_dim);
    ds.bags.reserve(num_bags);
    for (std::uint32_t b = 0; b < num_bags; ++b) {
        const std::uint64_t label_off = r.pos;
        const std::uint32_t label = r.u32("bag label");
        if (label >= classes)
            throw FormatError("mibg: label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(classes) + ")",
                              label_off);
        Bag bag;
        bag.label = static_cast<int>(label);
        bag.instances.resize(static_cast<std::size_t>(ds.instances * ds.feat_dim));
        for (auto& v : bag.instances) {
            const std::uint64_t off = r.pos;
            const float fv = r.f32("bag features");
            if (!std::isfinite(fv)) throw FormatError("mibg: non-finite feature value", off);
            v = static_cast<double>(fv);
        }
        ds.bags.push_back(std::move(bag));
    }
    if (r.pos != buf.size())
        throw FormatError("mibg: " + std::to_string(buf.size() - r.pos) + " trailing bytes", r.pos);
    return ds;
}

std::vector<std::vector<int>> make_batches(int dataset_size, int batch_size,
                                           std::uint64_t epoch_seed) {
    if (batch_size < 2)
        throw ConfigError("make_batches: batch size must be >= 2, got " + std::to_string(batch_size));
    std::vector<int> order(static_cast<std::size_t>(dataset_size));
    for (int i = 0; i < dataset_size; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(epoch_seed);
    rng.shuffle(order);

    std::vector<std::vector<int>> batches;
    for (int start = 0; start < dataset_size; start += batch_size) {
        const int end = std::min(dataset_size, start + batch_size);
        if (end - start < 2) break;  // drop a trailing singleton
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

}  // namespace micacl
