#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "microhmc/model.hpp"

namespace microhmc {

void EightSchoolsData::validate() const {
    if (y.empty()) {
        throw ValidationError("eight schools data: J must be at least 1");
    }
    if (y.size() != sigma.size()) {
        throw ValidationError(
            fmt::format("eight schools data: y has {} entries but sigma has {}", y.size(), sigma.size()));
    }
    for (std::size_t j = 0; j < sigma.size(); ++j) {
        if (!(sigma[j] > 0.0) || !std::isfinite(sigma[j])) {
            throw ValidationError(fmt::format("eight schools data: sigma[{}] = {} is not positive", j + 1, sigma[j]));
        }
        if (!std::isfinite(y[j])) {
            throw ValidationError(fmt::format("eight schools data: y[{}] is not finite", j + 1));
        }
    }
}

namespace {

// Minimal reader for R dump files: `name <- value` or `name = value`, where
// value is a number or c(n1, n2, ...). `#` starts a comment.
class DumpReader {
public:
    explicit DumpReader(std::string_view text) : text_(text) {}

    std::map<std::string, std::vector<double>> read() {
        std::map<std::string, std::vector<double>> out;
        skip_space();
        while (pos_ < text_.size()) {
            std::string key = identifier();
            skip_space();
            if (text_.compare(pos_, 2, "<-") == 0) {
                pos_ += 2;
            } else if (peek() == '=') {
                ++pos_;
            } else {
                fail(fmt::format("expected '<-' or '=' after '{}'", key));
            }
            skip_space();
            std::vector<double> values;
            if (peek() == 'c' && next_non_space(pos_ + 1) == '(') {
                pos_ = text_.find('(', pos_) + 1;
                skip_space();
                if (peek() == ')') {
                    ++pos_;
                } else {
                    while (true) {
                        values.push_back(number());
                        skip_space();
                        if (peek() == ',') {
                            ++pos_;
                            skip_space();
                        } else if (peek() == ')') {
                            ++pos_;
                            break;
                        } else {
                            fail("expected ',' or ')' in vector");
                        }
                    }
                }
            } else {
                values.push_back(number());
            }
            if (out.contains(key)) {
                fail(fmt::format("duplicate key '{}'", key));
            }
            out.emplace(std::move(key), std::move(values));
            skip_space();
            while (peek() == ';') {
                ++pos_;
                skip_space();
            }
        }
        return out;
    }

private:
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    char next_non_space(std::size_t from) const {
        while (from < text_.size() && std::isspace(static_cast<unsigned char>(text_[from]))) {
            ++from;
        }
        return from < text_.size() ? text_[from] : '\0';
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.')) {
            ++pos_;
        }
        if (start == pos_) {
            fail("expected a variable name");
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    double number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.' || c == 'e' ||
                c == 'E') {
                ++pos_;
            } else {
                break;
            }
        }
        const std::string token(text_.substr(start, pos_ - start));
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
            fail(fmt::format("malformed number '{}'", token));
        }
        return value;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
            line += text_[i] == '\n' ? 1 : 0;
        }
        throw ValidationError(fmt::format("eight schools data, line {}: {}", line, msg));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

EightSchoolsData parse_eight_schools(std::string_view text) {
    auto entries = DumpReader(text).read();
    for (const char* required : {"J", "y", "sigma"}) {
        if (!entries.contains(required)) {
            throw ValidationError(fmt::format("eight schools data: missing '{}'", required));
        }
    }
    for (const auto& [key, _] : entries) {
        if (key != "J" && key != "y" && key != "sigma") {
            throw ValidationError(fmt::format("eight schools data: unknown key '{}'", key));
        }
    }
    const auto& j_values = entries["J"];
    if (j_values.size() != 1 || j_values[0] != std::floor(j_values[0]) || j_values[0] < 1) {
        throw ValidationError("eight schools data: J must be a single positive integer");
    }
    EightSchoolsData data{entries["y"], entries["sigma"]};
    const auto J = static_cast<std::size_t>(j_values[0]);
    if (data.y.size() != J) {
        throw ValidationError(fmt::format("eight schools data: J = {} but y has {} entries", J, data.y.size()));
    }
    data.validate();
    return data;
}

EightSchoolsData load_eight_schools(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(fmt::format("cannot open data file '{}'", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_eight_schools(buf.str());
}

}  // namespace microhmc
