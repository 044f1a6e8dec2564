#include "nn/core.hpp"

#include <charconv>
#include <cstdlib>
#include <system_error>

namespace nn {

namespace {

std::string shortest_repr(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw RangeError("number formatting failed");
    return std::string(buf, end);
}

}  // namespace

std::string to_string(NNReal x) {
    return shortest_repr(x.value());
}

std::string to_log_string(NNReal x) {
    if (x.log() == 0.0) return "1";
    if (x.log() == 1.0) return "e";
    return "e^" + shortest_repr(x.log());
}

NNReal parse_real(std::string_view text) {
    size_t begin = text.find_first_not_of(" \t");
    size_t end = text.find_last_not_of(" \t");
    if (begin == std::string_view::npos)
        throw ParseError("empty numeric literal", 0);
    text = text.substr(begin, end - begin + 1);

    if (text == "e") return NNReal::one();
    if (text.size() > 2 && text[0] == 'e' && text[1] == '^') {
        std::string_view body = text.substr(2);
        double lg = 0.0;
        auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), lg);
        if (ec != std::errc{} || ptr != body.data() + body.size())
            throw ParseError("malformed log-form literal", begin + 2);
        return NNReal::from_log(lg);
    }

    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError("malformed numeric literal", begin);
    if (!(v > 0.0))
        throw ParseError("numeric literal must be strictly positive", begin);
    return NNReal::from_value(v);
}

}  // namespace nn
