#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mnms/rng.hpp"

namespace mnms {

struct AttributeSpec {
    std::string name;
    std::uint32_t size_bytes = 8;
    bool indexed = false;
};

struct RelationSpec {
    std::string name;
    std::uint64_t row_count = 0;
    std::uint32_t row_size_bytes = 1;
    std::vector<AttributeSpec> attributes;
    std::uint64_t seed = 0;
    bool materialized = false;

    std::uint64_t relation_bytes() const { return row_count * row_size_bytes; }
    std::uint32_t attribute_index(std::string_view attr) const;  // schema_error if absent
    const AttributeSpec& attribute(std::string_view attr) const;
    std::uint32_t attribute_offset(std::uint32_t index) const;
    void validate() const;
};

struct SelectivitySpec {
    double fraction = 0.0;
    std::uint64_t planted_match_count = 0;

    // planted_match_count = round(fraction * n)
    static SelectivitySpec of(double fraction, std::uint64_t n);
};

// Uniform-random scatter of rows over memory nodes. Stored compactly as
// (seed, row count, node count); the assignment is a seeded permutation
// composed with mod node_count, so per-node counts are exact and differ
// by at most one.
class Placement {
  public:
    Placement(std::uint64_t row_count, std::uint32_t node_count, std::uint64_t seed);

    std::uint32_t node_count() const { return node_count_; }
    std::uint64_t row_count() const { return row_count_; }
    std::uint64_t seed() const { return seed_; }

    std::uint32_t node_of(std::uint64_t row) const;
    std::uint64_t rows_on_node(std::uint32_t node) const;  // closed form
    std::uint64_t max_rows_per_node() const;

    // One pass over all rows; desk-scale only.
    std::vector<std::vector<std::uint64_t>> bucket_rows() const;

  private:
    std::uint64_t row_count_;
    std::uint32_t node_count_;
    std::uint64_t seed_;
    SeededPermutation perm_;
};

enum class PlantKind { none, select, join_build, join_probe };

// A generated relation. Row contents are a pure function of (spec.seed,
// row index), so nothing is stored per row; "materialized" only gates
// whether byte-level access is permitted (the functional-oracle path).
// Exactly planted_match_count rows carry the planted key.
class Relation {
  public:
    Relation(RelationSpec spec, PlantKind kind, std::uint32_t attr_index,
             std::uint64_t match_count);

    const RelationSpec& spec() const { return spec_; }
    bool materialized() const { return spec_.materialized; }
    PlantKind plant_kind() const { return kind_; }
    std::uint32_t planted_attr_index() const { return attr_index_; }
    std::uint64_t planted_match_count() const { return match_count_; }

    // Sentinel value select-planted rows carry in the target attribute.
    std::vector<std::uint8_t> planted_select_value() const;

    // Logical key of the target attribute for one row (metadata level).
    std::uint64_t key_of(std::uint64_t row) const;

    // Byte-level access; requires materialized (oracle_error otherwise).
    std::vector<std::uint8_t> attribute_bytes(std::uint64_t row, std::uint32_t attr) const;
    std::vector<std::uint8_t> row_bytes(std::uint64_t row) const;

    // Expand a logical key to attribute bytes of the planted width.
    std::vector<std::uint8_t> expand_key(std::uint64_t key) const;

  private:
    void require_materialized() const;

    RelationSpec spec_;
    PlantKind kind_;
    std::uint32_t attr_index_;
    std::uint64_t match_count_;
    unsigned key_bytes_;        // min(attr width, 8)
    SeededPermutation rank_;    // row -> rank; rank < match_count marks a planted row
};

// Plants exactly sel.planted_match_count rows with the sentinel select
// value in the first attribute; all other rows draw keys from a disjoint
// range. spec_error if the selectivity exceeds the row count.
Relation make_relation(const RelationSpec& spec, const SelectivitySpec& sel);

// Plants a 1:1 equijoin: round(output_fraction * n_R) keys of R each
// matched by exactly one row of S, every other key globally unique, so
// the equijoin cardinality is exact by construction.
std::pair<Relation, Relation> make_join_pair(const RelationSpec& spec_r,
                                             const RelationSpec& spec_s,
                                             std::string_view join_attr,
                                             double output_fraction);

// topology_error if node_count == 0.
Placement place_rows(const Relation& rel, std::uint32_t node_count, std::uint64_t seed);

}  // namespace mnms
