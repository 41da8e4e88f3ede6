#include "vdlab/tokenizer.hpp"

#include <stdexcept>

namespace vdlab {

std::vector<int> encode(std::string_view text) {
    std::vector<int> out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(static_cast<int>(c));
    return out;
}

std::string decode(const std::vector<int>& tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (int t : tokens) {
        if (t < 0 || t >= 256)
            throw std::invalid_argument("decode: id " + std::to_string(t) +
                                        " is not a raw byte (use render for specials)");
        out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
    }
    return out;
}

std::string render(const std::vector<int>& tokens) {
    std::string out;
    for (int t : tokens) {
        switch (t) {
            case vocab::kPad: out += "<PAD>"; break;
            case vocab::kEos: out += "<EOS>"; break;
            case vocab::kYes: out += "<YES>"; break;
            case vocab::kNo: out += "<NO>"; break;
            default:
                if (t < 0 || t >= 256)
                    throw std::invalid_argument("render: id " + std::to_string(t) + " out of range");
                out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
        }
    }
    return out;
}

}  // namespace vdlab
