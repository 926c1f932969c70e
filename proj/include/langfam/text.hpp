#pragma once

#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "langfam/error.hpp"
#include "langfam/util.hpp"

namespace langfam {

/// Unicode NFC of a UTF-8 string. Invalid sequences become U+FFFD.
inline std::string to_nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error(ErrorCode::InvariantViolation, "ICU NFC normalizer unavailable");
    const auto source = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (nfc->isNormalized(source, status) && U_SUCCESS(status)) {
        std::string out;
        source.toUTF8String(out);
        return out;
    }
    status = U_ZERO_ERROR;
    const icu::UnicodeString normalized = nfc->normalize(source, status);
    if (U_FAILURE(status)) throw Error(ErrorCode::InvariantViolation, "NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

/// Canonical snippet text: NFC, LF line endings, no trailing spaces or tabs on
/// any line, no trailing blank lines.
inline std::string normalize_snippet(std::string_view text) {
    std::string unix;
    unix.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            unix.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            unix.push_back(text[i]);
        }
    }
    std::string trimmed;
    trimmed.reserve(unix.size());
    std::size_t line_start = 0;
    while (line_start <= unix.size()) {
        auto line_end = unix.find('\n', line_start);
        const bool last = line_end == std::string::npos;
        if (last) line_end = unix.size();
        auto end = line_end;
        while (end > line_start && (unix[end - 1] == ' ' || unix[end - 1] == '\t')) --end;
        trimmed.append(unix, line_start, end - line_start);
        if (last) break;
        trimmed.push_back('\n');
        line_start = line_end + 1;
    }
    while (!trimmed.empty() && trimmed.back() == '\n') trimmed.pop_back();
    return to_nfc(trimmed);
}

inline bool is_blank(std::string_view text) noexcept {
    for (const char c : text) {
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\f' && c != '\v') return false;
    }
    return true;
}

/// Hex FNV-1a of the normalized text.
inline std::string content_hash(std::string_view text) { return digest_hex(normalize_snippet(text)); }

}  // namespace langfam
