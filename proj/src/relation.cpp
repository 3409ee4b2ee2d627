#include "mnms/relation.hpp"

#include <cmath>
#include <cstring>

#include "mnms/errors.hpp"

namespace mnms {

namespace {

constexpr std::uint64_t kRankStream = 0x72616e6b;      // planted-rank permutation
constexpr std::uint64_t kNonMatchStream = 0x6e6f6e6d;  // non-matching select keys
constexpr std::uint64_t kFillerStream = 0x66696c6c;    // row padding bytes

// Key space of a k-byte attribute; k == 8 uses the full 64-bit range.
std::uint64_t key_zone(unsigned key_bytes) {
    // zone = 2^(8k) / 4, the size of each planting quarter
    if (key_bytes >= 8) return std::uint64_t{1} << 62;
    return (std::uint64_t{1} << (8 * key_bytes)) / 4;
}

}  // namespace

std::uint32_t RelationSpec::attribute_index(std::string_view attr) const {
    for (std::uint32_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == attr) return i;
    throw schema_error("relation '" + name + "' has no attribute '" + std::string(attr) + "'");
}

const AttributeSpec& RelationSpec::attribute(std::string_view attr) const {
    return attributes[attribute_index(attr)];
}

std::uint32_t RelationSpec::attribute_offset(std::uint32_t index) const {
    std::uint32_t off = 0;
    for (std::uint32_t i = 0; i < index; ++i) off += attributes[i].size_bytes;
    return off;
}

void RelationSpec::validate() const {
    if (row_size_bytes == 0)
        throw spec_error("relation '" + name + "': row_size_bytes must be positive");
    std::uint64_t attr_sum = 0;
    for (const auto& a : attributes) {
        if (a.size_bytes == 0)
            throw spec_error("attribute '" + a.name + "': size_bytes must be positive");
        attr_sum += a.size_bytes;
    }
    if (attr_sum > row_size_bytes)
        throw spec_error("relation '" + name + "': attribute sizes exceed row size");
}

SelectivitySpec SelectivitySpec::of(double fraction, std::uint64_t n) {
    if (fraction < 0.0 || fraction > 1.0)
        throw spec_error("selectivity fraction must lie in [0, 1]");
    SelectivitySpec s;
    s.fraction = fraction;
    s.planted_match_count =
        static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(n)));
    if (s.planted_match_count > n)
        throw spec_error("planted match count exceeds row count");
    return s;
}

Placement::Placement(std::uint64_t row_count, std::uint32_t node_count, std::uint64_t seed)
    : row_count_(row_count),
      node_count_(node_count),
      seed_(seed),
      perm_(row_count, mix64(seed)) {
    if (node_count == 0) throw topology_error("placement requires at least one node");
}

std::uint32_t Placement::node_of(std::uint64_t row) const {
    return static_cast<std::uint32_t>(perm_(row) % node_count_);
}

std::uint64_t Placement::rows_on_node(std::uint32_t node) const {
    // The permutation is a bijection on [0, n), so node counts equal the
    // residue-class sizes of n mod node_count regardless of seed.
    if (node >= node_count_) throw topology_error("node index out of range");
    return row_count_ / node_count_ + (node < row_count_ % node_count_ ? 1 : 0);
}

std::uint64_t Placement::max_rows_per_node() const {
    return row_count_ / node_count_ + (row_count_ % node_count_ ? 1 : 0);
}

std::vector<std::vector<std::uint64_t>> Placement::bucket_rows() const {
    std::vector<std::vector<std::uint64_t>> buckets(node_count_);
    for (std::uint32_t node = 0; node < node_count_; ++node)
        buckets[node].reserve(rows_on_node(node));
    for (std::uint64_t row = 0; row < row_count_; ++row)
        buckets[node_of(row)].push_back(row);
    return buckets;
}

Relation::Relation(RelationSpec spec, PlantKind kind, std::uint32_t attr_index,
                   std::uint64_t match_count)
    : spec_(std::move(spec)),
      kind_(kind),
      attr_index_(attr_index),
      match_count_(match_count),
      key_bytes_(8),
      rank_(spec_.row_count, mix64(spec_.seed ^ kRankStream)) {
    spec_.validate();
    if (!spec_.attributes.empty()) {
        std::uint32_t w = spec_.attributes[attr_index_].size_bytes;
        key_bytes_ = w < 8 ? w : 8;
    }
}

std::vector<std::uint8_t> Relation::expand_key(std::uint64_t key) const {
    std::uint32_t width = spec_.attributes[attr_index_].size_bytes;
    std::vector<std::uint8_t> out(width);
    for (unsigned i = 0; i < key_bytes_ && i < width; ++i)
        out[i] = static_cast<std::uint8_t>(key >> (8 * i));
    // Filler depends only on the key so equal keys yield equal bytes.
    for (std::uint32_t i = 8; i < width; ++i)
        out[i] = static_cast<std::uint8_t>(counter_rng(key, kFillerStream, i));
    return out;
}

std::vector<std::uint8_t> Relation::planted_select_value() const {
    if (kind_ != PlantKind::select)
        throw spec_error("relation '" + spec_.name + "' has no planted select value");
    return expand_key(0);
}

std::uint64_t Relation::key_of(std::uint64_t row) const {
    const std::uint64_t zone = key_zone(key_bytes_);
    const std::uint64_t rank = rank_(row);
    switch (kind_) {
        case PlantKind::select:
            if (rank < match_count_) return 0;  // sentinel
            return 2 * zone + counter_rng(spec_.seed, kNonMatchStream, row) % (2 * zone - 1);
        case PlantKind::join_build:
            return rank < match_count_ ? 1 + rank : zone + rank;
        case PlantKind::join_probe:
            return rank < match_count_ ? 1 + rank : 2 * zone + rank;
        case PlantKind::none:
            return counter_rng(spec_.seed, kNonMatchStream, row);
    }
    return 0;
}

void Relation::require_materialized() const {
    if (!spec_.materialized)
        throw oracle_error("relation '" + spec_.name + "' is not materialized");
}

std::vector<std::uint8_t> Relation::attribute_bytes(std::uint64_t row, std::uint32_t attr) const {
    require_materialized();
    if (attr >= spec_.attributes.size())
        throw schema_error("attribute index out of range");
    if (attr == attr_index_) return expand_key(key_of(row));
    std::uint32_t width = spec_.attributes[attr].size_bytes;
    std::vector<std::uint8_t> out(width);
    for (std::uint32_t i = 0; i < width; ++i)
        out[i] = static_cast<std::uint8_t>(
            counter_rng(spec_.seed ^ (attr + 1), kFillerStream, row * spec_.row_size_bytes + i));
    return out;
}

std::vector<std::uint8_t> Relation::row_bytes(std::uint64_t row) const {
    require_materialized();
    std::vector<std::uint8_t> out(spec_.row_size_bytes);
    std::uint32_t off = 0;
    for (std::uint32_t a = 0; a < spec_.attributes.size(); ++a) {
        auto bytes = attribute_bytes(row, a);
        std::memcpy(out.data() + off, bytes.data(), bytes.size());
        off += spec_.attributes[a].size_bytes;
    }
    for (std::uint32_t i = off; i < spec_.row_size_bytes; ++i)
        out[i] = static_cast<std::uint8_t>(
            counter_rng(spec_.seed, kFillerStream, row * spec_.row_size_bytes + i));
    return out;
}

Relation make_relation(const RelationSpec& spec, const SelectivitySpec& sel) {
    spec.validate();
    if (spec.attributes.empty())
        throw spec_error("relation '" + spec.name + "' needs at least one attribute");
    if (sel.planted_match_count > spec.row_count)
        throw spec_error("invalid selectivity: planted match count " +
                         std::to_string(sel.planted_match_count) + " exceeds row count " +
                         std::to_string(spec.row_count));
    return Relation(spec, PlantKind::select, 0, sel.planted_match_count);
}

std::pair<Relation, Relation> make_join_pair(const RelationSpec& spec_r,
                                             const RelationSpec& spec_s,
                                             std::string_view join_attr,
                                             double output_fraction) {
    spec_r.validate();
    spec_s.validate();
    const std::uint32_t ir = spec_r.attribute_index(join_attr);
    const std::uint32_t is = spec_s.attribute_index(join_attr);
    const AttributeSpec& ar = spec_r.attributes[ir];
    const AttributeSpec& as = spec_s.attributes[is];
    if (ar.size_bytes != as.size_bytes)
        throw schema_error("join attribute '" + std::string(join_attr) +
                           "' has mismatched sizes (" + std::to_string(ar.size_bytes) + " vs " +
                           std::to_string(as.size_bytes) + ")");
    if (output_fraction < 0.0 || output_fraction > 1.0)
        throw spec_error("join output fraction must lie in [0, 1]");

    const std::uint64_t matches = static_cast<std::uint64_t>(
        std::llround(output_fraction * static_cast<double>(spec_r.row_count)));
    if (matches > spec_s.row_count)
        throw spec_error("1:1 planting needs at least " + std::to_string(matches) +
                         " rows in '" + spec_s.name + "'");

    // Each planting quarter of the key space must hold all of one side's keys.
    const unsigned kb = ar.size_bytes < 8 ? ar.size_bytes : 8;
    const std::uint64_t zone =
        kb >= 8 ? (std::uint64_t{1} << 62) : (std::uint64_t{1} << (8 * kb)) / 4;
    if (spec_r.row_count >= zone || spec_s.row_count >= zone)
        throw schema_error("join attribute '" + std::string(join_attr) +
                           "' is too narrow to plant globally unique keys");

    return {Relation(spec_r, PlantKind::join_build, ir, matches),
            Relation(spec_s, PlantKind::join_probe, is, matches)};
}

Placement place_rows(const Relation& rel, std::uint32_t node_count, std::uint64_t seed) {
    if (node_count == 0) throw topology_error("invalid topology: node_count must be >= 1");
    return Placement(rel.spec().row_count, node_count, seed);
}

}  // namespace mnms
