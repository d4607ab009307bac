#pragma once

#include <string>
#include <vector>

namespace ptbench::vocab {

// Fixed symbol vocabulary for the synthetic arithmetic task. Word-level
// tokens; numbers are rendered digit by digit.
enum Token : int {
    kDigit0 = 0,  // ids 0..9 are the digits
    kYou = 10,
    kHave = 11,
    kItems = 12,
    kThen = 13,
    kAdd = 14,
    kSub = 15,
    kMul = 16,
    kWhat = 17,
    kIs = 18,
    kResult = 19,
    kEquals = 20,
    kSemi = 21,
    kMarker = 22,  // "####"
    kEos = 23,
    kBos = 24,
    kVocabSize = 25,
};

inline bool is_digit(int tok) { return tok >= 0 && tok <= 9; }

const std::string& token_name(int tok);

// Digits of a value in [0, 99] as two tokens (fixed-width render).
void push_two_digits(std::vector<int>& out, int value);

// Render a token sequence as text. Adjacent digit tokens are concatenated
// into one number literal; other tokens are space-separated; bos/eos are
// dropped. This is the text the answer extractors operate on.
std::string detokenize(const std::vector<int>& tokens);

}  // namespace ptbench::vocab
