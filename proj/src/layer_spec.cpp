#include "eev/layer_spec.hpp"

#include <cctype>

#include "eev/common.hpp"

namespace eev {

namespace {

class Cursor {
public:
    Cursor(const std::string& text) : text_(text) {}

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    bool done() const { return pos_ >= text_.size(); }

    void expect(char c, const char* field) {
        if (peek() != c)
            throw ParseError("layer spec \"" + text_ + "\": expected '" + c + "' introducing " +
                             field + " at position " + std::to_string(pos_) + ", found " + found());
        ++pos_;
    }

    int integer(const char* field) {
        if (!std::isdigit(static_cast<unsigned char>(peek())))
            throw ParseError("layer spec \"" + text_ + "\": expected digits for " + field +
                             " at position " + std::to_string(pos_) + ", found " + found());
        long v = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (text_[pos_] - '0');
            if (v > 1000000) throw ParseError("layer spec \"" + text_ + "\": " + field + " too large");
            ++pos_;
        }
        return static_cast<int>(v);
    }

    std::string found() const {
        if (done()) return "end of input";
        return std::string("'") + text_[pos_] + "'";
    }

    std::size_t pos() const { return pos_; }

private:
    const std::string& text_;
    std::size_t pos_ = 0;
};

} // namespace

LayerSpec parse_layer_spec(const std::string& text) {
    Cursor cur(text);
    LayerSpec spec;
    if (cur.peek() == 'd') {
        spec.op_kind = OpKind::deconv;
        cur.expect('d', "deconv marker");
    }
    cur.expect('k', "kernel size");
    spec.kernel = cur.integer("kernel size");
    cur.expect('c', "channel count");
    spec.channels = cur.integer("channel count");
    cur.expect('s', "stride");
    spec.stride = cur.integer("stride");
    if (!cur.done())
        throw ParseError("layer spec \"" + text + "\": trailing characters starting at position " +
                         std::to_string(cur.pos()) + ", found " + cur.found());

    if (spec.kernel != 1 && spec.kernel != 3 && spec.kernel != 5 && spec.kernel != 7)
        throw ParseError("layer spec \"" + text + "\": kernel must be one of 1,3,5,7, got " +
                         std::to_string(spec.kernel));
    if (spec.channels <= 0)
        throw ParseError("layer spec \"" + text + "\": channel count must be positive");
    if (spec.stride != 1 && spec.stride != 2)
        throw ParseError("layer spec \"" + text + "\": stride must be 1 or 2, got " +
                         std::to_string(spec.stride));
    return spec;
}

std::string format_layer_spec(const LayerSpec& spec) {
    std::string out;
    if (spec.op_kind == OpKind::deconv) out += 'd';
    out += 'k';
    out += std::to_string(spec.kernel);
    out += 'c';
    out += std::to_string(spec.channels);
    out += 's';
    out += std::to_string(spec.stride);
    return out;
}

std::vector<LayerSpec> parse_layer_stack(const std::vector<std::string>& texts) {
    std::vector<LayerSpec> specs;
    specs.reserve(texts.size());
    for (const auto& t : texts) specs.push_back(parse_layer_spec(t));
    return specs;
}

} // namespace eev
