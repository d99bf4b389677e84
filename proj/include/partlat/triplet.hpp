// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include "partlat/error.hpp"

namespace partlat {

enum class PredicateKind { Functional, Spatial };

enum class PredicateClass { Functional, Vertical, Horizontal, Containment, SymmetryArrangement, ProximityContact };

/// Closed predicate vocabulary. Enumerator order is the vocabulary order used
/// to break ties during predicate mapping.
enum class PredicateId : int {
    Support,
    Attach,
    Hinge,
    Symmetry,
    Above,
    Below,
    OnTopOf,
    Under,
    InFrontOf,
    Behind,
    LeftOf,
    RightOf,
    Inside,
    Surrounding,
    SymmetricWith,
    ParallelTo,
    AlignedWith,
    Touching,
    AttachedTo,
    ConnectedWith,
};

struct PredicateInfo {
    PredicateId id;
    std::string_view name;
    PredicateKind kind;
    PredicateClass cls;
};

inline constexpr std::array<PredicateInfo, 20> kPredicates{{
    {PredicateId::Support, "support", PredicateKind::Functional, PredicateClass::Functional},
    {PredicateId::Attach, "attach", PredicateKind::Functional, PredicateClass::Functional},
    {PredicateId::Hinge, "hinge", PredicateKind::Functional, PredicateClass::Functional},
    {PredicateId::Symmetry, "symmetry", PredicateKind::Functional, PredicateClass::Functional},
    {PredicateId::Above, "above", PredicateKind::Spatial, PredicateClass::Vertical},
    {PredicateId::Below, "below", PredicateKind::Spatial, PredicateClass::Vertical},
    {PredicateId::OnTopOf, "on-top-of", PredicateKind::Spatial, PredicateClass::Vertical},
    {PredicateId::Under, "under", PredicateKind::Spatial, PredicateClass::Vertical},
    {PredicateId::InFrontOf, "in-front-of", PredicateKind::Spatial, PredicateClass::Horizontal},
    {PredicateId::Behind, "behind", PredicateKind::Spatial, PredicateClass::Horizontal},
    {PredicateId::LeftOf, "left-of", PredicateKind::Spatial, PredicateClass::Horizontal},
    {PredicateId::RightOf, "right-of", PredicateKind::Spatial, PredicateClass::Horizontal},
    {PredicateId::Inside, "inside", PredicateKind::Spatial, PredicateClass::Containment},
    {PredicateId::Surrounding, "surrounding", PredicateKind::Spatial, PredicateClass::Containment},
    {PredicateId::SymmetricWith, "symmetric-with", PredicateKind::Spatial, PredicateClass::SymmetryArrangement},
    {PredicateId::ParallelTo, "parallel-to", PredicateKind::Spatial, PredicateClass::SymmetryArrangement},
    {PredicateId::AlignedWith, "aligned-with", PredicateKind::Spatial, PredicateClass::SymmetryArrangement},
    {PredicateId::Touching, "touching", PredicateKind::Spatial, PredicateClass::ProximityContact},
    {PredicateId::AttachedTo, "attached-to", PredicateKind::Spatial, PredicateClass::ProximityContact},
    {PredicateId::ConnectedWith, "connected-with", PredicateKind::Spatial, PredicateClass::ProximityContact},
}};

class Predicate {
public:
    constexpr Predicate() = default;
    constexpr explicit Predicate(PredicateId id) : id_(id) {}

    constexpr PredicateId id() const { return id_; }
    constexpr int index() const { return static_cast<int>(id_); }
    constexpr const PredicateInfo& info() const { return kPredicates[static_cast<std::size_t>(id_)]; }
    constexpr std::string_view name() const { return info().name; }
    constexpr PredicateKind kind() const { return info().kind; }
    constexpr PredicateClass cls() const { return info().cls; }
    constexpr bool is_spatial() const { return kind() == PredicateKind::Spatial; }

    friend constexpr auto operator<=>(const Predicate&, const Predicate&) = default;

private:
    PredicateId id_ = PredicateId::Support;
};

inline std::optional<Predicate> predicate_from_name(std::string_view name) {
    for (const auto& info : kPredicates)
        if (info.name == name) return Predicate(info.id);
    return std::nullopt;
}

inline Predicate parse_predicate(std::string_view name) {
    if (auto p = predicate_from_name(name)) return *p;
    throw InputError("unknown predicate '" + std::string(name) + "'");
}

inline std::string_view to_string(PredicateKind kind) {
    return kind == PredicateKind::Functional ? "functional" : "spatial";
}

enum class Provenance { Metadata, Parsed, ExternalFile };

inline std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::Metadata: return "metadata";
        case Provenance::Parsed: return "parsed";
        case Provenance::ExternalFile: return "external-file";
    }
    return "parsed";
}

inline Provenance parse_provenance(std::string_view s) {
    if (s == "metadata") return Provenance::Metadata;
    if (s == "parsed") return Provenance::Parsed;
    if (s == "external-file") return Provenance::ExternalFile;
    throw InputError("unknown provenance '" + std::string(s) + "'");
}

struct TripletKey {
    int i = 0;
    int j = 0;
    Predicate predicate;

    friend constexpr auto operator<=>(const TripletKey&, const TripletKey&) = default;
};

struct RelationalTriplet {
    int i = 0;
    int j = 0;
    Predicate predicate;
    std::string source_phrase;
    Provenance provenance = Provenance::Parsed;

    TripletKey key() const { return {i, j, predicate}; }
};

}  // namespace partlat
