// Binary model container.
//
//   "TBRFMODL"  8 bytes magic
//   u32         format version
//   u64         payload length
//   payload
//   u64         FNV-1a 64 checksum of the payload
//
// All integers little-endian; doubles as their IEEE-754 bit patterns, so a
// load reproduces every stored value exactly. Partitions are stored as their
// root cell plus the split sequence and rebuilt by replay.

#include <bit>
#include <cstring>
#include <type_traits>

#include "tbrf/error.hpp"
#include "tbrf/forest.hpp"

namespace tbrf {
namespace {

static_assert(std::endian::native == std::endian::little, "model format assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'B', 'R', 'F', 'M', 'O', 'D', 'L'};
constexpr std::size_t kHeaderSize = sizeof kMagic + 4 + 8;

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

class Writer {
public:
    template <typename T>
    void put(T value)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        out_.append(raw, sizeof(T));
    }
    void u8(std::uint8_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(v); }
    void reals(const std::vector<double>& values)
    {
        for (double v : values)
            f64(v);
    }
    void text(std::string_view s)
    {
        u64(s.size());
        out_.append(s);
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_{in} {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        T value;
        std::memcpy(&value, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return get<double>(); }
    std::size_t count(std::size_t element_size)
    {
        std::uint64_t n = u64();
        // Every element occupies at least element_size bytes, which bounds n.
        if (element_size > 0 && n > (in_.size() - pos_) / element_size)
            throw IoError("corrupt model file: implausible element count");
        return static_cast<std::size_t>(n);
    }
    std::vector<double> reals(std::size_t n)
    {
        need(n * sizeof(double));
        std::vector<double> values(n);
        for (double& v : values)
            v = f64();
        return values;
    }
    std::string text()
    {
        std::size_t n = count(1);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const
    {
        if (in_.size() - pos_ < n)
            throw IoError("corrupt model file: truncated payload");
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

enum : std::uint8_t { kAxisTag = 0, kObliqueTag = 1 };
enum : std::uint8_t { kConstantTag = 0, kLinearTag = 1, kKernelTag = 2 };

void write_cell(Writer& w, const Cell& cell)
{
    w.u64(cell.id);
    w.u8(cell.shape == CellShape::Polytope ? 1 : 0);
    w.reals(cell.bounds.lower);
    w.reals(cell.bounds.upper);
    w.u64(cell.halfspaces.size());
    for (const Halfspace& h : cell.halfspaces) {
        w.reals(h.normal);
        w.f64(h.offset);
        w.u8(h.strict ? 1 : 0);
    }
}

Cell read_cell(Reader& r, std::size_t d)
{
    Cell cell;
    cell.id = r.u64();
    cell.shape = r.u8() ? CellShape::Polytope : CellShape::AxisBox;
    cell.bounds.lower = r.reals(d);
    cell.bounds.upper = r.reals(d);
    const std::size_t halfspaces = r.count((d + 1) * sizeof(double) + 1);
    for (std::size_t i = 0; i < halfspaces; ++i) {
        Halfspace h;
        h.normal = r.reals(d);
        h.offset = r.f64();
        h.strict = r.u8() != 0;
        cell.halfspaces.push_back(std::move(h));
    }
    return cell;
}

void write_partition(Writer& w, const PartitionTree& tree)
{
    write_cell(w, tree.root());
    w.u8(tree.geometry() == Geometry::Oblique ? 1 : 0);
    w.u64(tree.split_count());
    for (const Split& split : tree.splits()) {
        if (const auto* axis = std::get_if<AxisSplit>(&split)) {
            w.u8(kAxisTag);
            w.u64(axis->leaf_id);
            w.u64(axis->dim);
            w.f64(axis->ratio);
        } else {
            const auto& oblique = std::get<ObliqueSplit>(split);
            w.u8(kObliqueTag);
            w.u64(oblique.leaf_id);
            w.reals(oblique.normal);
            w.f64(oblique.offset);
        }
    }
}

PartitionTree read_partition(Reader& r, std::size_t d)
{
    Cell root = read_cell(r, d);
    const Geometry geometry = r.u8() ? Geometry::Oblique : Geometry::AxisParallel;
    const std::size_t n = r.count(1 + 8 + 8);
    std::vector<Split> splits;
    splits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t tag = r.u8();
        if (tag == kAxisTag) {
            AxisSplit split;
            split.leaf_id = r.u64();
            split.dim = r.u64();
            split.ratio = r.f64();
            splits.emplace_back(split);
        } else if (tag == kObliqueTag) {
            ObliqueSplit split;
            split.leaf_id = r.u64();
            split.normal = r.reals(d);
            split.offset = r.f64();
            splits.emplace_back(std::move(split));
        } else {
            throw IoError("corrupt model file: unknown split tag");
        }
    }
    try {
        return PartitionTree::replay(std::move(root), geometry, splits);
    } catch (const ValidationError& e) {
        throw IoError(std::string("corrupt model file: ") + e.what());
    }
}

void write_model(Writer& w, const LeafModel& model)
{
    if (const auto* constant = std::get_if<ConstantModel>(&model)) {
        w.u8(kConstantTag);
        w.f64(constant->value);
    } else if (const auto* linear = std::get_if<LinearModel>(&model)) {
        w.u8(kLinearTag);
        w.reals(linear->weights);
        w.f64(linear->bias);
    } else {
        const auto& kernel = std::get<KernelModel>(model);
        w.u8(kKernelTag);
        w.f64(kernel.gamma);
        w.f64(kernel.bias);
        w.u64(kernel.coefficients.size());
        w.reals(kernel.coefficients);
        w.reals(kernel.support);
    }
}

LeafModel read_model(Reader& r, std::size_t d)
{
    switch (r.u8()) {
    case kConstantTag:
        return ConstantModel{r.f64()};
    case kLinearTag: {
        LinearModel model;
        model.weights = r.reals(d);
        model.bias = r.f64();
        return model;
    }
    case kKernelTag: {
        KernelModel model;
        model.dim = d;
        model.gamma = r.f64();
        model.bias = r.f64();
        const std::size_t n = r.count((d + 1) * sizeof(double));
        model.coefficients = r.reals(n);
        model.support = r.reals(n * d);
        return model;
    }
    default:
        throw IoError("corrupt model file: unknown leaf model tag");
    }
}

} // namespace

std::string serialize(const Forest& forest)
{
    Writer w;
    w.text(forest.params.to_config());
    w.u64(forest.meta.n);
    w.u64(forest.meta.dim);
    w.f64(forest.meta.bound);
    w.f64(forest.meta.global_mean);
    w.reals(forest.meta.root.lower);
    w.reals(forest.meta.root.upper);
    w.u64(forest.parents.size());
    for (const ParentTree& parent : forest.parents) {
        write_partition(w, parent.stage_one);
        w.u64(parent.children.size());
        for (const ChildTree& child : parent.children) {
            write_partition(w, child.partition);
            w.u64(child.splits_used);
            w.f64(child.score);
            w.u64(child.candidate_index);
            w.u64(child.leaf_models.size());
            for (const LeafModel& model : child.leaf_models)
                write_model(w, model);
        }
    }

    const std::string& payload = w.bytes();
    Writer file;
    file.bytes().append(kMagic, sizeof kMagic);
    file.put<std::uint32_t>(Forest::kFormatVersion);
    file.u64(payload.size());
    file.bytes().append(payload);
    file.u64(fnv1a(payload));
    return std::move(file.bytes());
}

Forest deserialize(std::string_view bytes)
{
    if (bytes.size() < kHeaderSize + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw IoError("corrupt model file: missing TBRF header");
    Reader header(bytes.substr(sizeof kMagic, 12));
    const auto version = header.get<std::uint32_t>();
    if (version != Forest::kFormatVersion)
        throw IoError("unsupported model format version " + std::to_string(version) + " (this build reads version " +
                      std::to_string(Forest::kFormatVersion) + ")");
    const std::uint64_t length = header.u64();
    if (length != bytes.size() - kHeaderSize - 8)
        throw IoError("corrupt model file: payload length mismatch (truncated?)");
    const std::string_view payload = bytes.substr(kHeaderSize, length);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + kHeaderSize + length, 8);
    if (stored != fnv1a(payload))
        throw IoError("corrupt model file: checksum mismatch");

    Reader r(payload);
    Forest forest;
    try {
        apply_config_text(forest.params, r.text(), "model parameters");
        forest.params.validate();
    } catch (const ValidationError& e) {
        throw IoError(std::string("corrupt model file: ") + e.what());
    }
    forest.meta.n = r.u64();
    const std::size_t d = r.u64();
    if (d == 0 || d > (1u << 20))
        throw IoError("corrupt model file: bad dimension");
    forest.meta.dim = d;
    forest.meta.bound = r.f64();
    forest.meta.global_mean = r.f64();
    forest.meta.root.lower = r.reals(d);
    forest.meta.root.upper = r.reals(d);

    const std::size_t T = r.count(1);
    for (std::size_t t = 0; t < T; ++t) {
        ParentTree parent{read_partition(r, d), {}};
        const std::size_t m = r.count(1);
        if (m != parent.stage_one.leaf_count())
            throw IoError("corrupt model file: child count does not match stage-one cells");
        for (std::size_t j = 0; j < m; ++j) {
            ChildTree child{read_partition(r, d), {}, {}, 0, 0.0, 0};
            child.splits_used = r.u64();
            child.score = r.f64();
            child.candidate_index = r.u64();
            const std::size_t leaves = r.count(1);
            if (leaves != child.partition.leaf_count())
                throw IoError("corrupt model file: leaf model count does not match partition");
            for (std::size_t l = 0; l < leaves; ++l)
                child.leaf_models.push_back(read_model(r, d));
            child.pending.assign(leaves, 0);
            parent.children.push_back(std::move(child));
        }
        forest.parents.push_back(std::move(parent));
    }
    if (!r.done())
        throw IoError("corrupt model file: trailing bytes");
    if (forest.parents.size() != forest.params.trees)
        throw IoError("corrupt model file: tree count does not match parameters");
    return forest;
}

} // namespace tbrf
