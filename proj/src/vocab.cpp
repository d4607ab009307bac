#include "ptbench/vocab.hpp"

#include <array>
#include <stdexcept>

namespace ptbench::vocab {

namespace {
const std::array<std::string, kVocabSize> kNames = {
    "0", "1",     "2",    "3",     "4",   "5",   "6",   "7",      "8",
    "9", "you",   "have", "items", "then", "add", "sub", "mul",   "what",
    "is", "result", "=",   ";",     "####", "<eos>", "<bos>",
};
}  // namespace

const std::string& token_name(int tok) {
    if (tok < 0 || tok >= kVocabSize) throw std::domain_error("token_name: out-of-vocab token");
    return kNames[static_cast<std::size_t>(tok)];
}

void push_two_digits(std::vector<int>& out, int value) {
    if (value < 0 || value > 99) throw std::domain_error("push_two_digits: value out of [0,99]");
    out.push_back(value / 10);
    out.push_back(value % 10);
}

std::string detokenize(const std::vector<int>& tokens) {
    std::string text;
    bool prev_digit = false;
    for (int tok : tokens) {
        if (tok == kEos || tok == kBos) continue;
        if (is_digit(tok)) {
            if (!prev_digit && !text.empty()) text += ' ';
            text += static_cast<char>('0' + tok);
            prev_digit = true;
        } else {
            if (!text.empty()) text += ' ';
            text += token_name(tok);
            prev_digit = false;
        }
    }
    return text;
}

}  // namespace ptbench::vocab
