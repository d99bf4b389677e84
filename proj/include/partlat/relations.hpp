// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "partlat/binary_io.hpp"
#include "partlat/geometry.hpp"
#include "partlat/rsl.hpp"
#include "partlat/triplet.hpp"

namespace partlat {

// ===========================================================================
// Relation lexicon
// ===========================================================================

struct RelationCue {
    std::vector<std::string> words;
    PredicateId predicate;
    // Passive cue ("supported by"): the grammatical object is the relation's subject.
    bool passive = false;
};

namespace detail {

inline RelationCue cue(std::string_view text, PredicateId p, bool passive = false) {
    return {text_words(text), p, passive};
}

inline const std::vector<RelationCue>& relation_cues() {
    using P = PredicateId;
    static const std::vector<RelationCue> cues = {
        // functional
        cue("support", P::Support), cue("supports", P::Support), cue("supporting", P::Support),
        cue("holds", P::Support), cue("holds up", P::Support), cue("hold up", P::Support), cue("bears", P::Support),
        cue("supported by", P::Support, true), cue("held up by", P::Support, true), cue("held by", P::Support, true),
        cue("rests upon", P::OnTopOf),
        cue("attach", P::Attach),
        cue("hinge", P::Hinge), cue("hinged to", P::Hinge), cue("hinged on", P::Hinge), cue("hinged with", P::Hinge),
        cue("hinges on", P::Hinge), cue("pivots on", P::Hinge), cue("pivots around", P::Hinge),
        cue("rotates around", P::Hinge), cue("articulated with", P::Hinge),
        cue("symmetry", P::Symmetry),
        // vertical
        cue("above", P::Above), cue("over", P::Above), cue("higher than", P::Above),
        cue("below", P::Below), cue("beneath", P::Below), cue("underneath", P::Below), cue("lower than", P::Below),
        cue("on top of", P::OnTopOf), cue("on", P::OnTopOf), cue("onto", P::OnTopOf), cue("atop", P::OnTopOf),
        cue("rests on", P::OnTopOf), cue("rest on", P::OnTopOf), cue("resting on", P::OnTopOf),
        cue("sits on", P::OnTopOf), cue("sit on", P::OnTopOf), cue("sitting on", P::OnTopOf),
        cue("placed on", P::OnTopOf), cue("mounted on", P::OnTopOf),
        cue("under", P::Under),
        // horizontal
        cue("in front of", P::InFrontOf), cue("ahead of", P::InFrontOf),
        cue("behind", P::Behind), cue("in back of", P::Behind), cue("at the back of", P::Behind),
        cue("left of", P::LeftOf), cue("to the left of", P::LeftOf), cue("on the left of", P::LeftOf),
        cue("right of", P::RightOf), cue("to the right of", P::RightOf), cue("on the right of", P::RightOf),
        // containment
        cue("inside", P::Inside), cue("inside of", P::Inside), cue("within", P::Inside), cue("in", P::Inside),
        cue("into", P::Inside), cue("contained in", P::Inside), cue("enclosed in", P::Inside),
        cue("surrounding", P::Surrounding), cue("surrounds", P::Surrounding), cue("surround", P::Surrounding),
        cue("around", P::Surrounding), cue("encloses", P::Surrounding), cue("encircles", P::Surrounding),
        cue("wraps around", P::Surrounding), cue("surrounded by", P::Surrounding, true),
        cue("enclosed by", P::Surrounding, true),
        // symmetry / arrangement
        cue("symmetric with", P::SymmetricWith), cue("symmetric to", P::SymmetricWith),
        cue("symmetrical with", P::SymmetricWith), cue("symmetrical to", P::SymmetricWith),
        cue("mirrors", P::SymmetricWith), cue("symmetric", P::SymmetricWith), cue("symmetrical", P::SymmetricWith),
        cue("parallel to", P::ParallelTo), cue("parallel with", P::ParallelTo), cue("parallel", P::ParallelTo),
        cue("aligned with", P::AlignedWith), cue("aligned to", P::AlignedWith), cue("in line with", P::AlignedWith),
        cue("lined up with", P::AlignedWith), cue("aligned", P::AlignedWith),
        // proximity / contact
        cue("touching", P::Touching), cue("in contact with", P::Touching), cue("contacts", P::Touching),
        cue("adjacent to", P::Touching), cue("next to", P::Touching), cue("against", P::Touching),
        cue("beside", P::Touching),
        cue("attached to", P::AttachedTo), cue("attaches to", P::AttachedTo), cue("touches", P::AttachedTo),
        cue("touch", P::AttachedTo), cue("fixed to", P::AttachedTo), cue("fastened to", P::AttachedTo),
        cue("affixed to", P::AttachedTo), cue("mounted to", P::AttachedTo), cue("glued to", P::AttachedTo),
        cue("bolted to", P::AttachedTo), cue("welded to", P::AttachedTo), cue("joined to", P::AttachedTo),
        cue("connected with", P::ConnectedWith), cue("connected to", P::ConnectedWith),
        cue("connects to", P::ConnectedWith), cue("connects", P::ConnectedWith), cue("connect", P::ConnectedWith),
        cue("linked to", P::ConnectedWith), cue("linked with", P::ConnectedWith), cue("joins", P::ConnectedWith),
        cue("joined with", P::ConnectedWith), cue("coupled to", P::ConnectedWith),
    };
    return cues;
}

inline const std::set<std::string>& determiners() {
    static const std::set<std::string> words = {
        "the", "a", "an", "its", "their", "his", "her", "this", "that", "these", "those", "each", "every",
        "all", "both", "some", "several", "many", "other", "another", "one", "two", "three", "four", "five",
        "six", "seven", "eight", "nine", "ten", "pair", "of"};
    return words;
}

inline const std::set<std::string>& copulas() {
    static const std::set<std::string> words = {"is", "are", "was", "were", "be", "being", "been", "appears", "seems"};
    return words;
}

inline const std::set<std::string>& clause_boundaries() {
    static const std::set<std::string> words = {",", "and", "or", "but", "which", "that", "while", "whereas",
                                                 "where", "when", "so", "then", "with", "at", "by", "for",
                                                 "from", "via", "using", "to", "of", "on", "in"};
    return words;
}

inline const std::set<std::string>& phrase_modifiers() {
    static const std::set<std::string> words = {"positioned", "placed", "located", "situated", "set", "sitting",
                                                 "standing", "lying", "hanging", "right", "just", "also", "fully",
                                                 "partly", "mostly", "slightly", "directly", "firmly", "tightly",
                                                 "securely", "loosely", "not", "always", "often", "usually"};
    return words;
}

inline bool is_modifier(const std::string& w) {
    if (phrase_modifiers().contains(w)) return true;
    return w.size() > 3 && w.ends_with("ly");
}

inline bool is_number(const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Lowercase word tokens with "," kept as its own token and sentence ends dropped.
inline std::vector<std::vector<std::string>> split_sentences(std::string_view text) {
    std::vector<std::vector<std::string>> sentences(1);
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) sentences.back().push_back(std::move(cur));
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80 || c == '\'') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == ',' || c == ':' || c == '(' || c == ')') {
            flush();
            sentences.back().push_back(",");
        } else if (c == '.' || c == ';' || c == '!' || c == '?' || c == '\n') {
            flush();
            if (!sentences.back().empty()) sentences.emplace_back();
        } else {
            flush();
        }
    }
    flush();
    if (sentences.back().empty()) sentences.pop_back();
    return sentences;
}

inline bool match_at(const std::vector<std::string>& tokens, std::size_t pos, const std::vector<std::string>& words) {
    if (pos + words.size() > tokens.size()) return false;
    for (std::size_t k = 0; k < words.size(); ++k)
        if (tokens[pos + k] != words[k]) return false;
    return true;
}

// Longest cue starting at pos, if any.
inline const RelationCue* cue_at(const std::vector<std::string>& tokens, std::size_t pos) {
    const RelationCue* best = nullptr;
    for (const auto& c : relation_cues())
        if (match_at(tokens, pos, c.words) && (!best || c.words.size() > best->words.size())) best = &c;
    return best;
}

inline std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t k = begin; k < end; ++k) {
        if (!out.empty()) out += ' ';
        out += words[k];
    }
    return out;
}

inline std::vector<std::string> strip_determiners(std::vector<std::string> words) {
    std::size_t k = 0;
    while (k < words.size() && (determiners().contains(words[k]) || is_number(words[k]))) ++k;
    words.erase(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(k));
    return words;
}

}  // namespace detail

// ===========================================================================
// Parsing, mapping, entity resolution
// ===========================================================================

struct Clause {
    std::string subject;
    std::string phrase;
    std::string object;  // empty for intransitive clauses ("the wings are symmetric")

    friend bool operator==(const Clause&, const Clause&) = default;
};

/// Pattern grammar  NP [copula] [modifiers] CUE NP  over a relation lexicon.
/// Passive cues swap subject and object. Never throws; text without a
/// recognizable clause yields an empty list.
inline std::vector<Clause> parse_clauses(std::string_view caption) {
    using namespace detail;
    std::vector<Clause> clauses;
    for (const auto& tokens : split_sentences(caption)) {
        std::size_t pos = 0;
        std::size_t search_from = 1;
        while (pos < tokens.size()) {
            // leftmost cue with a non-empty chunk before it
            std::size_t cue_pos = tokens.size();
            const RelationCue* found = nullptr;
            for (std::size_t k = std::max(pos + 1, search_from); k < tokens.size(); ++k) {
                if (const auto* c = cue_at(tokens, k)) {
                    cue_pos = k;
                    found = c;
                    break;
                }
            }
            if (!found) break;
            const std::size_t cue_end = cue_pos + found->words.size();

            // subject chunk: first segment of [pos, cue_pos) after leading boundaries
            std::size_t begin = pos;
            while (begin < cue_pos && clause_boundaries().contains(tokens[begin]) && tokens[begin] != "on" &&
                   tokens[begin] != "in")
                ++begin;
            std::size_t end = begin;
            while (end < cue_pos && tokens[end] != "," && tokens[end] != "which" && tokens[end] != "that") ++end;
            // Relation phrase prefix starts at the first copula or modifier.
            std::size_t split_at = begin;
            while (split_at < end && !copulas().contains(tokens[split_at]) && !is_modifier(tokens[split_at]))
                ++split_at;
            if (end < cue_pos) split_at = end;  // chunk interrupted by a relative clause

            std::vector<std::string> subject_words(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   tokens.begin() + static_cast<std::ptrdiff_t>(split_at));
            subject_words = strip_determiners(std::move(subject_words));

            std::vector<std::string> phrase_words;
            if (end == cue_pos) {
                for (std::size_t k = split_at; k < cue_pos; ++k)
                    if (!copulas().contains(tokens[k]) && tokens[k] != ",") phrase_words.push_back(tokens[k]);
            }
            for (std::size_t k = cue_pos; k < cue_end; ++k) phrase_words.push_back(tokens[k]);

            // object NP
            std::size_t obj = cue_end;
            while (obj < tokens.size() && (determiners().contains(tokens[obj]) || is_number(tokens[obj]))) ++obj;
            std::size_t obj_end = obj;
            while (obj_end < tokens.size() && !clause_boundaries().contains(tokens[obj_end]) &&
                   !copulas().contains(tokens[obj_end]) && !cue_at(tokens, obj_end))
                ++obj_end;

            if (subject_words.empty()) {
                // the cue word belongs to the subject ("the support beam ..."); look further right
                search_from = cue_pos + 1;
                continue;
            }
            {
                Clause c;
                c.subject = join_words(subject_words, 0, subject_words.size());
                c.phrase = join_words(phrase_words, 0, phrase_words.size());
                c.object = join_words(tokens, obj, obj_end);
                if (found->passive) {
                    if (!c.object.empty()) std::swap(c.subject, c.object);
                }
                if (!c.object.empty() || !found->passive) clauses.push_back(std::move(c));
            }
            pos = std::max(obj_end, cue_end);
            search_from = pos + 1;
        }
    }
    return clauses;
}

inline constexpr double kPredicateSimilarityFloor = 0.35;

/// Canonical predicate for a relation phrase: exact name or synonym hit, then
/// the longest lexicon cue contained in the phrase, then the nearest
/// predicate name by embedding cosine similarity above the floor. Ties go to
/// vocabulary order.
inline std::optional<Predicate> map_predicate(std::string_view phrase, const Embedder& emb,
                                              double floor = kPredicateSimilarityFloor) {
    const auto words = text_words(phrase);
    if (words.empty()) return std::nullopt;

    for (const auto& info : kPredicates)
        if (text_words(info.name) == words) return Predicate(info.id);
    for (const auto& c : detail::relation_cues())
        if (c.words == words) return Predicate(c.predicate);

    const RelationCue* best = nullptr;
    std::size_t best_pos = 0;
    for (std::size_t pos = 0; pos < words.size(); ++pos) {
        for (const auto& c : detail::relation_cues()) {
            if (!detail::match_at(words, pos, c.words)) continue;
            const bool better = !best || c.words.size() > best->words.size() ||
                                (c.words.size() == best->words.size() && pos == best_pos &&
                                 static_cast<int>(c.predicate) < static_cast<int>(best->predicate));
            if (better) {
                best = &c;
                best_pos = pos;
            }
        }
    }
    if (best) return Predicate(best->predicate);

    const auto query = emb.try_embed(phrase);
    if (!query) return std::nullopt;
    std::optional<Predicate> winner;
    double best_sim = -2.0;
    for (const auto& info : kPredicates) {
        const auto target = emb.try_embed(info.name);
        if (!target) continue;
        const double sim = cosine_similarity(*query, *target);
        if (sim > best_sim) {
            best_sim = sim;
            winner = Predicate(info.id);
        }
    }
    if (winner && best_sim >= floor) return winner;
    return std::nullopt;
}

struct PartLabel {
    int part_id = 0;
    std::string label;
};

using PartVocabulary = std::vector<PartLabel>;

inline std::string singularize(std::string_view word) {
    std::string w(word);
    auto ends = [&](std::string_view s) { return w.size() > s.size() && w.ends_with(s); };
    if (ends("ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends("ves")) return w.substr(0, w.size() - 3) + "f";
    if (ends("sses") || ends("ches") || ends("shes") || ends("xes")) return w.substr(0, w.size() - 2);
    if (ends("ss") || ends("us") || ends("is")) return w;
    if (ends("s")) return w.substr(0, w.size() - 1);
    return w;
}

// Singularizes the head (last) word of a multi-word name.
inline std::string singularize_phrase(const std::vector<std::string>& words) {
    if (words.empty()) return {};
    std::string out = detail::join_words(words, 0, words.size() - 1);
    if (!out.empty()) out += ' ';
    return out + singularize(words.back());
}

/// Part slots referenced by `name`. A plural name maps to every part whose
/// singular label matches; a singular name selects the lowest matching id.
/// Leading modifiers are dropped one at a time until something matches.
inline std::vector<int> resolve_entities(std::string_view name, const PartVocabulary& vocab) {
    auto words = detail::strip_determiners(text_words(name));
    std::vector<std::pair<std::string, int>> labels;
    labels.reserve(vocab.size());
    for (const auto& p : vocab) labels.emplace_back(singularize_phrase(text_words(p.label)), p.part_id);

    while (!words.empty()) {
        const std::string joined = detail::join_words(words, 0, words.size());
        const std::string singular = singularize_phrase(words);
        const bool plural = singular != joined;
        std::vector<int> ids;
        for (const auto& [label, id] : labels)
            if (label == singular) ids.push_back(id);
        if (!ids.empty()) {
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            if (!plural) ids.resize(1);
            return ids;
        }
        words.erase(words.begin());
    }
    return {};
}

/// parse -> map -> resolve over all captions. Plural references expand to
/// every slot (self-pairs removed); an intransitive symmetric clause over a
/// plural subject pairs its instances. Output is deduplicated in first-seen order.
inline std::vector<RelationalTriplet> canonicalize(const std::vector<std::string>& captions,
                                                   const PartVocabulary& vocab, const Embedder& emb,
                                                   double floor = kPredicateSimilarityFloor) {
    std::vector<RelationalTriplet> out;
    std::set<TripletKey> seen;
    auto emit = [&](int i, int j, Predicate p, const std::string& phrase) {
        RelationalTriplet t{i, j, p, phrase, Provenance::Parsed};
        if (seen.insert(t.key()).second) out.push_back(std::move(t));
    };
    for (const auto& caption : captions) {
        for (const auto& clause : parse_clauses(caption)) {
            const auto predicate = map_predicate(clause.phrase, emb, floor);
            if (!predicate) continue;
            const auto subjects = resolve_entities(clause.subject, vocab);
            if (subjects.empty()) continue;
            if (clause.object.empty()) {
                if (predicate->cls() != PredicateClass::SymmetryArrangement &&
                    predicate->id() != PredicateId::Symmetry)
                    continue;
                for (std::size_t a = 0; a < subjects.size(); ++a)
                    for (std::size_t b = a + 1; b < subjects.size(); ++b)
                        emit(subjects[a], subjects[b], *predicate, clause.phrase);
                continue;
            }
            const auto objects = resolve_entities(clause.object, vocab);
            for (int i : subjects)
                for (int j : objects)
                    if (i != j) emit(i, j, *predicate, clause.phrase);
        }
    }
    return out;
}

// ===========================================================================
// Geometric validation
// ===========================================================================

struct ValidationThresholds {
    double eps_rel = 0.05;   // ordering slack, fraction of the union-box extent on the tested axis
    double tau_gap = 0.02;   // max contact gap, fraction of the union-box diagonal
    double theta_in = 0.9;   // containment fraction
    double theta_sym = 0.5;  // mirrored-box IoU

    void validate() const {
        auto check = [](double v, const char* name) {
            if (!(v > 0.0 && v <= 1.0)) throw InputError(std::string(name) + " must lie in (0, 1]");
        };
        check(eps_rel, "eps_rel");
        check(tau_gap, "tau_gap");
        check(theta_in, "theta_in");
        check(theta_sym, "theta_sym");
    }
};

enum class ValidationStatus { Valid, Violated, Unchecked };

inline std::string_view to_string(ValidationStatus s) {
    switch (s) {
        case ValidationStatus::Valid: return "valid";
        case ValidationStatus::Violated: return "violated";
        case ValidationStatus::Unchecked: return "unchecked";
    }
    return "unchecked";
}

struct ValidationResult {
    ValidationStatus status = ValidationStatus::Unchecked;
    std::string reason;

    static ValidationResult valid() { return {ValidationStatus::Valid, {}}; }
    static ValidationResult violated(std::string why) { return {ValidationStatus::Violated, std::move(why)}; }
    static ValidationResult unchecked() { return {ValidationStatus::Unchecked, {}}; }
};

namespace detail {

// i lies on the positive side of j along axis: ordered boxes with slack, and
// strictly ordered centers so that a predicate and its mirror never both hold.
inline bool ordered_positive(const Aabb& bi, const Aabb& bj, int axis, double eps_rel) {
    const Aabb u = box_union(bi, bj);
    return bi.min(axis) >= bj.max(axis) - eps_rel * u.extent(axis) && bi.center()(axis) > bj.center()(axis);
}

inline int dominant_axis(const Aabb& b) {
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (b.extent(a) > b.extent(axis)) axis = a;
    return axis;
}

inline bool centers_aligned(const Aabb& bi, const Aabb& bj, int axis, double eps_rel) {
    const Aabb u = box_union(bi, bj);
    return std::abs(bi.center()(axis) - bj.center()(axis)) <= eps_rel * u.extent(axis);
}

inline double contained_fraction(const Aabb& inner, const Aabb& outer) {
    const double vol = inner.volume();
    if (vol <= 0.0) return outer.contains(inner) ? 1.0 : 0.0;
    return intersection_volume(inner, outer) / vol;
}

inline ValidationResult check_vertical_stack(const Aabb& upper, const Aabb& lower, const ValidationThresholds& th) {
    if (!ordered_positive(upper, lower, 2, th.eps_rel)) return ValidationResult::violated("z-order");
    if (overlap_length(upper, lower, 0) <= 0.0 || overlap_length(upper, lower, 1) <= 0.0)
        return ValidationResult::violated("xy-overlap");
    const double gap = upper.min(2) - lower.max(2);
    if (gap > th.tau_gap * box_union(upper, lower).diagonal()) return ValidationResult::violated("contact-gap");
    return ValidationResult::valid();
}

}  // namespace detail

/// Geometric check of one triplet against part boxes (x right, y forward,
/// z up). Functional predicates are never rejected. `object_box` sets the
/// mirror plane for symmetric-with; it defaults to the union of all boxes.
inline ValidationResult validate_triplet(const RelationalTriplet& t, const std::map<int, Aabb>& boxes,
                                         const ValidationThresholds& th = {},
                                         std::optional<Aabb> object_box = std::nullopt) {
    using P = PredicateId;
    if (!t.predicate.is_spatial()) return ValidationResult::unchecked();
    const auto it_i = boxes.find(t.i);
    const auto it_j = boxes.find(t.j);
    if (it_i == boxes.end()) throw InputError("no bounding box for part " + std::to_string(t.i));
    if (it_j == boxes.end()) throw InputError("no bounding box for part " + std::to_string(t.j));
    const Aabb& bi = it_i->second;
    const Aabb& bj = it_j->second;
    const Aabb u = box_union(bi, bj);
    auto verdict = [](bool ok, const char* why) {
        return ok ? ValidationResult::valid() : ValidationResult::violated(why);
    };

    switch (t.predicate.id()) {
        case P::Above: return verdict(detail::ordered_positive(bi, bj, 2, th.eps_rel), "z-order");
        case P::Below: return verdict(detail::ordered_positive(bj, bi, 2, th.eps_rel), "z-order");
        case P::OnTopOf: return detail::check_vertical_stack(bi, bj, th);
        case P::Under: return detail::check_vertical_stack(bj, bi, th);
        case P::RightOf: return verdict(detail::ordered_positive(bi, bj, 0, th.eps_rel), "x-order");
        case P::LeftOf: return verdict(detail::ordered_positive(bj, bi, 0, th.eps_rel), "x-order");
        case P::InFrontOf: return verdict(detail::ordered_positive(bi, bj, 1, th.eps_rel), "y-order");
        case P::Behind: return verdict(detail::ordered_positive(bj, bi, 1, th.eps_rel), "y-order");
        case P::Inside: return verdict(detail::contained_fraction(bi, bj) >= th.theta_in, "containment");
        case P::Surrounding: return verdict(detail::contained_fraction(bj, bi) >= th.theta_in, "containment");
        case P::Touching:
        case P::AttachedTo:
        case P::ConnectedWith: return verdict(box_gap(bi, bj) <= th.tau_gap * u.diagonal(), "contact-gap");
        case P::SymmetricWith: {
            Aabb whole = object_box.value_or(u);
            if (!object_box)
                for (const auto& [id, b] : boxes) whole = box_union(whole, b);
            const double mid = whole.center()(0);
            Aabb mirrored = bj;
            mirrored.min(0) = 2.0 * mid - bj.max(0);
            mirrored.max(0) = 2.0 * mid - bj.min(0);
            return verdict(box_iou(bi, mirrored) >= th.theta_sym, "mirror-iou");
        }
        case P::ParallelTo:
        case P::AlignedWith: {
            const int axis = detail::dominant_axis(bi);
            if (axis != detail::dominant_axis(bj)) return ValidationResult::violated("dominant-axis");
            if (t.predicate.id() == P::ParallelTo)
                return verdict(detail::centers_aligned(bi, bj, axis, th.eps_rel), "center-alignment");
            for (int a = 0; a < 3; ++a)
                if (a != axis && !detail::centers_aligned(bi, bj, a, th.eps_rel))
                    return ValidationResult::violated("center-alignment");
            return ValidationResult::valid();
        }
        default: return ValidationResult::unchecked();
    }
}

// ===========================================================================
// Corpus statistics and OOD splits
// ===========================================================================

struct CorpusObject {
    std::string id;
    std::string category;
    std::string split = "train";
    PartVocabulary parts;
    std::vector<RelationalTriplet> triplets;
};

struct DatasetStats {
    std::size_t objects = 0;
    std::size_t categories = 0;
    std::size_t parts = 0;
    std::size_t triplets = 0;
    double mean_parts_per_object = 0.0;
    double mean_relations_per_object = 0.0;
    std::map<std::string, std::size_t> predicate_histogram;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["objects"] = objects;
        j["categories"] = categories;
        j["parts"] = parts;
        j["triplets"] = triplets;
        j["mean_parts_per_object"] = mean_parts_per_object;
        j["mean_relations_per_object"] = mean_relations_per_object;
        nlohmann::ordered_json hist = nlohmann::ordered_json::object();
        for (const auto& [name, count] : predicate_histogram) hist[name] = count;
        j["predicate_histogram"] = hist;
        return j;
    }
};

inline DatasetStats dataset_stats(const std::vector<CorpusObject>& corpus) {
    DatasetStats s;
    std::set<std::string> categories;
    for (const auto& obj : corpus) {
        ++s.objects;
        if (!obj.category.empty()) categories.insert(obj.category);
        s.parts += obj.parts.size();
        s.triplets += obj.triplets.size();
        for (const auto& t : obj.triplets) ++s.predicate_histogram[std::string(t.predicate.name())];
    }
    s.categories = categories.size();
    if (s.objects > 0) {
        s.mean_parts_per_object = static_cast<double>(s.parts) / static_cast<double>(s.objects);
        s.mean_relations_per_object = static_cast<double>(s.triplets) / static_cast<double>(s.objects);
    }
    return s;
}

inline constexpr int kDefaultOodMinCount = 2;
inline constexpr double kRareTailFraction = 0.1;

struct OodSplits {
    std::vector<std::string> rare_labels;
    std::vector<std::string> id;
    std::vector<std::string> ood_parts;
    std::vector<std::string> ood_rel;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["rare_labels"] = rare_labels;
        j["id"] = id;
        j["ood_parts"] = ood_parts;
        j["ood_rel"] = ood_rel;
        return j;
    }
};

/// Labels in the bottom decile of training-set object-level frequency (among
/// labels seen at least min_count times). The decile boundary is the count of
/// the ceil(10%)-th rarest label; every label at or below it is rare, unless
/// that boundary equals the most frequent count (no tail).
inline std::vector<std::string> rare_part_labels(const std::vector<CorpusObject>& corpus, int min_count) {
    std::map<std::string, int> freq;
    for (const auto& obj : corpus) {
        if (obj.split != "train") continue;
        std::set<std::string> labels;
        for (const auto& p : obj.parts) labels.insert(singularize_phrase(text_words(p.label)));
        for (const auto& l : labels) ++freq[l];
    }
    std::vector<std::pair<int, std::string>> eligible;
    for (const auto& [label, count] : freq)
        if (count >= min_count) eligible.emplace_back(count, label);
    if (eligible.empty()) return {};
    std::sort(eligible.begin(), eligible.end());
    const auto k = static_cast<std::size_t>(std::ceil(kRareTailFraction * static_cast<double>(eligible.size())));
    const int boundary = eligible[std::max<std::size_t>(k, 1) - 1].first;
    if (boundary >= eligible.back().first) return {};
    std::vector<std::string> rare;
    for (const auto& [count, label] : eligible)
        if (count <= boundary) rare.push_back(label);
    return rare;
}

/// Test objects partitioned into in-distribution, rare-part and held-out
/// predicate splits. The two OOD splits may overlap.
inline OodSplits ood_splits(const std::vector<CorpusObject>& corpus, int min_count = kDefaultOodMinCount,
                            const std::set<PredicateId>& holdout = {}) {
    OodSplits out;
    out.rare_labels = rare_part_labels(corpus, min_count);
    const std::set<std::string> rare(out.rare_labels.begin(), out.rare_labels.end());
    for (const auto& obj : corpus) {
        if (obj.split != "test") continue;
        const bool has_rare = std::any_of(obj.parts.begin(), obj.parts.end(), [&](const PartLabel& p) {
            return rare.contains(singularize_phrase(text_words(p.label)));
        });
        const bool has_holdout = std::any_of(obj.triplets.begin(), obj.triplets.end(), [&](const RelationalTriplet& t) {
            return holdout.contains(t.predicate.id());
        });
        if (has_rare) out.ood_parts.push_back(obj.id);
        if (has_holdout) out.ood_rel.push_back(obj.id);
        if (!has_rare && !has_holdout) out.id.push_back(obj.id);
    }
    return out;
}

// ===========================================================================
// Text formats
// ===========================================================================

struct TripletRecord {
    std::string object_id;
    RelationalTriplet triplet;
};

namespace detail {

inline std::string sanitize_field(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return out;
}

inline int parse_int_field(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(where + ": expected an integer, got '" + s + "'");
    }
}

inline bool skip_line(const std::string& line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

}  // namespace detail

// One record per line: object_id, i, j, predicate, kind, provenance, source_phrase (tab-separated).
inline std::string format_triplets(const std::vector<TripletRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        const auto& t = r.triplet;
        out << detail::sanitize_field(r.object_id) << '\t' << t.i << '\t' << t.j << '\t' << t.predicate.name() << '\t'
            << to_string(t.predicate.kind()) << '\t' << to_string(t.provenance) << '\t'
            << detail::sanitize_field(t.source_phrase) << '\n';
    }
    return out.str();
}

inline std::vector<TripletRecord> parse_triplets(const std::vector<std::string>& lines, const std::string& source) {
    std::vector<TripletRecord> records;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (detail::skip_line(lines[n])) continue;
        const std::string where = source + ":" + std::to_string(n + 1);
        auto fields = split(lines[n], '\t');
        if (fields.size() == 6) fields.emplace_back();
        if (fields.size() != 7) throw InputError(where + ": expected 7 tab-separated fields");
        TripletRecord r;
        r.object_id = fields[0];
        r.triplet.i = detail::parse_int_field(fields[1], where);
        r.triplet.j = detail::parse_int_field(fields[2], where);
        const auto p = predicate_from_name(fields[3]);
        if (!p) throw InputError(where + ": unknown predicate '" + fields[3] + "'");
        r.triplet.predicate = *p;
        if (fields[4] != to_string(p->kind()))
            throw InputError(where + ": kind '" + fields[4] + "' does not match predicate " + fields[3]);
        try {
            r.triplet.provenance = parse_provenance(fields[5]);
        } catch (const InputError& e) {
            throw InputError(where + ": " + e.what());
        }
        r.triplet.source_phrase = fields[6];
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<TripletRecord> read_triplets(const std::filesystem::path& path) {
    return parse_triplets(read_lines(path), path.string());
}

// Parts file: "object_id<TAB>part_id<TAB>label" or "part_id<TAB>label" (object "0").
inline std::map<std::string, PartVocabulary> read_parts(const std::filesystem::path& path) {
    std::map<std::string, PartVocabulary> out;
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (detail::skip_line(lines[n])) continue;
        const std::string where = path.string() + ":" + std::to_string(n + 1);
        const auto f = split(lines[n], '\t');
        if (f.size() == 3) {
            out[f[0]].push_back({detail::parse_int_field(f[1], where), f[2]});
        } else if (f.size() == 2) {
            out["0"].push_back({detail::parse_int_field(f[0], where), f[1]});
        } else {
            throw InputError(where + ": expected 2 or 3 tab-separated fields");
        }
    }
    return out;
}

// Captions file: "object_id<TAB>caption" or a bare caption line (object "0").
inline std::map<std::string, std::vector<std::string>> read_captions(const std::filesystem::path& path) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& line : read_lines(path)) {
        if (detail::skip_line(line)) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) out["0"].push_back(line);
        else out[line.substr(0, tab)].push_back(line.substr(tab + 1));
    }
    return out;
}

// Geometry file: whitespace-separated "object_id part_id x y z" or "part_id x y z".
inline std::map<std::string, std::map<int, PointCloud>> read_part_geometry(const std::filesystem::path& path) {
    std::map<std::string, std::map<int, PointCloud>> out;
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (detail::skip_line(lines[n])) continue;
        const std::string where = path.string() + ":" + std::to_string(n + 1);
        std::istringstream in(lines[n]);
        std::vector<std::string> f;
        for (std::string tok; in >> tok;) f.push_back(tok);
        std::string object = "0";
        std::size_t k = 0;
        if (f.size() == 5) object = f[k++];
        else if (f.size() != 4) throw InputError(where + ": expected 4 or 5 fields");
        const int part = detail::parse_int_field(f[k++], where);
        Point3 p;
        for (int a = 0; a < 3; ++a) {
            try {
                p(a) = std::stod(f[k++]);
            } catch (const std::exception&) {
                throw InputError(where + ": bad coordinate");
            }
        }
        if (!p.allFinite()) throw InputError(where + ": non-finite coordinate");
        out[object][part].points.push_back(p);
    }
    return out;
}

}  // namespace partlat
