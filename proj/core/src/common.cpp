#include "novelbench/common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace novelbench {

namespace {

struct FieldInfo {
    Field field;
    std::string_view name;
    std::string_view display;
};

constexpr std::array<FieldInfo, 6> kFieldInfo = {{
    {Field::Cs, "cs", "Computer Science"},
    {Field::Math, "math", "Mathematics"},
    {Field::Physics, "physics", "Physics"},
    {Field::QBio, "q-bio", "Quantitative Biology"},
    {Field::QFin, "q-fin", "Quantitative Finance"},
    {Field::Stat, "stat", "Statistics"},
}};

// arXiv archives grouped under Physics in the category taxonomy.
constexpr std::array<std::string_view, 13> kPhysicsArchives = {
    "astro-ph", "cond-mat", "gr-qc", "hep-ex",  "hep-lat", "hep-ph",  "hep-th",
    "math-ph",  "nlin",     "nucl-ex", "nucl-th", "physics", "quant-ph"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::optional<int> to_int(std::string_view s) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::optional<unsigned> month_from_abbrev(std::string_view m) {
    static constexpr std::array<std::string_view, 12> kMonths = {
        "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    for (unsigned i = 0; i < kMonths.size(); ++i) {
        if (kMonths[i] == m) return i + 1;
    }
    return std::nullopt;
}

std::optional<Date> make_valid(int y, unsigned m, unsigned d) {
    std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)};
    if (!ymd.ok()) return std::nullopt;
    return Date(std::chrono::sys_days(ymd));
}

}  // namespace

std::string_view to_string(Field field) {
    return kFieldInfo[static_cast<std::size_t>(field)].name;
}

std::string_view display_name(Field field) {
    return kFieldInfo[static_cast<std::size_t>(field)].display;
}

std::optional<Field> parse_field(std::string_view name) {
    for (const auto& info : kFieldInfo) {
        if (info.name == name) return info.field;
    }
    // "qbio" / "qfin" spellings appear in result tables.
    if (name == "qbio") return Field::QBio;
    if (name == "qfin") return Field::QFin;
    return std::nullopt;
}

std::optional<Field> field_from_category(std::string_view category) {
    const auto archive = category.substr(0, category.find('.'));
    if (archive.empty()) return std::nullopt;
    for (const auto& info : kFieldInfo) {
        if (info.name == archive) return info.field;
    }
    if (std::find(kPhysicsArchives.begin(), kPhysicsArchives.end(), archive) !=
        kPhysicsArchives.end()) {
        return Field::Physics;
    }
    return std::nullopt;
}

Date::Date(int year, unsigned month, unsigned day) {
    auto valid = make_valid(year, month, day);
    if (!valid) throw DataError("invalid calendar date");
    *this = *valid;
}

int Date::year() const {
    return static_cast<int>(std::chrono::year_month_day(days_).year());
}

std::string Date::iso() const {
    const std::chrono::year_month_day ymd(days_);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::optional<Date> Date::parse(std::string_view text) {
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);

    // ISO: YYYY-MM-DD[...]
    if (text.size() >= 10 && text[4] == '-' && text[7] == '-') {
        auto y = to_int(text.substr(0, 4));
        auto m = to_int(text.substr(5, 2));
        auto d = to_int(text.substr(8, 2));
        if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
        return make_valid(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
    }

    // RFC 1123: "Mon, 2 Apr 2007 19:18:42 GMT"
    auto comma = text.find(',');
    if (comma != std::string_view::npos) text.remove_prefix(comma + 1);
    std::array<std::string_view, 3> parts;
    std::size_t n = 0;
    while (n < parts.size()) {
        while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
        if (text.empty()) break;
        auto end = std::find_if(text.begin(), text.end(), is_space) - text.begin();
        parts[n++] = text.substr(0, static_cast<std::size_t>(end));
        text.remove_prefix(static_cast<std::size_t>(end));
    }
    if (n != 3) return std::nullopt;
    auto d = to_int(parts[0]);
    auto m = month_from_abbrev(parts[1]);
    auto y = to_int(parts[2]);
    if (!d || !m || !y || *d < 1) return std::nullopt;
    return make_valid(*y, *m, static_cast<unsigned>(*d));
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(static_cast<std::size_t>(len) * 2, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = kHex[digest[i] >> 4];
        out[2 * i + 1] = kHex[digest[i] & 0xF];
    }
    return out;
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("SeededRng::below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % bound;
}

}  // namespace novelbench
