#pragma once

#include "siegel/forms.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace siegel {

// Binary container for Hermite data:
//   "SGLH" | u32 version | i32 g | i32 d | i32 k | i32 cutoff | f64 h |
//   coefficients as little-endian (f64 re, f64 im), components in
//   lexicographic subset order, each in lexicographic multi-index order.
// A bare field is stored as a 0-form with d = 0.
inline constexpr char kContainerMagic[4] = {'S', 'G', 'L', 'H'};
inline constexpr std::uint32_t kContainerVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("container: truncated input");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace detail

inline void write_container(std::ostream& os, const PForm& w) {
    os.write(kContainerMagic, 4);
    detail::put_le<std::uint32_t>(os, kContainerVersion);
    detail::put_le<std::int32_t>(os, w.trunc.g);
    detail::put_le<std::int32_t>(os, w.d);
    detail::put_le<std::int32_t>(os, w.k);
    detail::put_le<std::int32_t>(os, w.trunc.cutoff);
    detail::put_le<double>(os, w.trunc.h);
    for (const auto& f : w.comps)
        for (const auto& z : f.c) {
            detail::put_le<double>(os, z.real());
            detail::put_le<double>(os, z.imag());
        }
}

inline PForm read_container(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kContainerMagic, 4) != 0) throw ConfigError("container: bad magic");
    if (detail::get_le<std::uint32_t>(is) != kContainerVersion) throw ConfigError("container: unsupported version");
    HermiteTruncation t;
    t.g = detail::get_le<std::int32_t>(is);
    int d = detail::get_le<std::int32_t>(is);
    int k = detail::get_le<std::int32_t>(is);
    t.cutoff = detail::get_le<std::int32_t>(is);
    t.h = detail::get_le<double>(is);
    if (t.g < 0 || t.g > 16 || t.cutoff < 1 || t.cutoff > (1 << 16)) throw ConfigError("container: implausible header");
    PForm w;
    if (d == 0) {
        if (k != 0) throw ConfigError("container: bare field must have k = 0");
        w = PForm{0, 0, t, {HermiteField::zero(t)}};
    } else {
        w = PForm::zero(d, k, t);
    }
    for (auto& f : w.comps)
        for (auto& z : f.c) {
            double re = detail::get_le<double>(is);
            double im = detail::get_le<double>(is);
            z = {re, im};
        }
    return w;
}

inline void write_container(std::ostream& os, const HermiteField& f) { write_container(os, PForm{0, 0, f.trunc, {f}}); }

inline HermiteField read_field_container(std::istream& is) {
    auto w = read_container(is);
    if (w.d != 0) throw ConfigError("container: expected a bare field");
    return w.comps[0];
}

inline nlohmann::json to_json(const PForm& w) {
    nlohmann::json j{{"g", w.trunc.g}, {"d", w.d}, {"k", w.k}, {"cutoff", w.trunc.cutoff}, {"h", w.trunc.h}};
    j["components"] = nlohmann::json::array();
    for (const auto& f : w.comps) {
        auto arr = nlohmann::json::array();
        for (const auto& z : f.c) arr.push_back({z.real(), z.imag()});
        j["components"].push_back(arr);
    }
    return j;
}

inline PForm pform_from_json(const nlohmann::json& j) {
    HermiteTruncation t{j.at("g").get<int>(), j.at("cutoff").get<int>(), j.at("h").get<double>()};
    int d = j.at("d").get<int>(), k = j.at("k").get<int>();
    PForm w = d == 0 ? PForm{0, 0, t, {HermiteField::zero(t)}} : PForm::zero(d, k, t);
    const auto& comps = j.at("components");
    if (comps.size() != w.comps.size()) throw ConfigError("form json: wrong number of components");
    for (std::size_t s = 0; s < comps.size(); ++s) {
        if (comps[s].size() != w.comps[s].c.size()) throw ConfigError("form json: wrong coefficient count");
        for (std::size_t i = 0; i < comps[s].size(); ++i)
            w.comps[s].c[i] = {comps[s][i].at(0).get<double>(), comps[s][i].at(1).get<double>()};
    }
    return w;
}

}  // namespace siegel
