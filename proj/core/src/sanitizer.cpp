#include "phishsim/sanitizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include "phishsim/errors.hpp"

namespace phishsim {

namespace {

// Tag-skeleton extraction over raw bytes, HTML5-flavored: lowercased
// names, attribute states matching the WHATWG tokenizer closely enough
// that serializing our own output re-parses to the same tree (the
// idempotence the similarity pipeline depends on). Text, comments,
// doctypes and CDATA are dropped; unclosed elements close at end of
// input; stray end tags are ignored.

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_void_element(std::string_view name) {
    static constexpr std::array names{"area", "base",  "br",    "col",  "embed",
                                      "hr",   "img",   "input", "link", "meta",
                                      "param", "source", "track", "wbr"};
    return std::find(names.begin(), names.end(), name) != names.end();
}

// Content of these elements is raw text (or close enough): skipped up to
// the matching end tag, never tokenized as markup.
bool is_rawtext_element(std::string_view name) {
    static constexpr std::array names{"script", "style",   "textarea", "title",
                                      "xmp",    "iframe",  "noembed",  "noframes"};
    return std::find(names.begin(), names.end(), name) != names.end();
}

struct Attribute {
    std::string name;
    std::string value;
};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += char(cp);
    } else if (cp < 0x800) {
        out += char(0xC0 | (cp >> 6));
        out += char(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += char(0xE0 | (cp >> 12));
        out += char(0x80 | ((cp >> 6) & 0x3F));
        out += char(0x80 | (cp & 0x3F));
    } else {
        out += char(0xF0 | (cp >> 18));
        out += char(0x80 | ((cp >> 12) & 0x3F));
        out += char(0x80 | ((cp >> 6) & 0x3F));
        out += char(0x80 | (cp & 0x3F));
    }
}

// Decodes &amp; &lt; &gt; &quot; &apos; and numeric references (semicolon
// required). Anything else stays literal, which the serializer's
// escaping keeps stable across repeated parses.
std::string decode_charrefs(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        if (in[i] != '&') {
            out += in[i++];
            continue;
        }
        std::size_t semi = in.find(';', i + 1);
        if (semi == std::string_view::npos || semi == i + 1 || semi - i > 12) {
            out += in[i++];
            continue;
        }
        std::string_view body = in.substr(i + 1, semi - i - 1);
        bool decoded = true;
        if (body == "amp") out += '&';
        else if (body == "lt") out += '<';
        else if (body == "gt") out += '>';
        else if (body == "quot") out += '"';
        else if (body == "apos") out += '\'';
        else if (body.size() >= 2 && body[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = true;
            if (body[1] == 'x' || body[1] == 'X') {
                if (body.size() < 3) ok = false;
                for (std::size_t k = 2; ok && k < body.size(); ++k) {
                    char c = to_lower(body[k]);
                    if (c >= '0' && c <= '9') cp = cp * 16 + unsigned(c - '0');
                    else if (c >= 'a' && c <= 'f') cp = cp * 16 + unsigned(c - 'a' + 10);
                    else ok = false;
                    if (cp > 0x110000) cp = 0x110000;
                }
            } else {
                for (std::size_t k = 1; ok && k < body.size(); ++k) {
                    char c = body[k];
                    if (c >= '0' && c <= '9') cp = cp * 10 + unsigned(c - '0');
                    else ok = false;
                    if (cp > 0x110000) cp = 0x110000;
                }
            }
            if (ok) append_utf8(out, cp);
            decoded = ok;
        } else {
            decoded = false;
        }
        if (decoded) i = semi + 1;
        else out += in[i++];
    }
    return out;
}

void encode_attr_value(std::string& out, std::string_view value) {
    for (char c : value) {
        if (c == '&') out += "&amp;";
        else if (c == '"') out += "&quot;";
        else if (c == '<') out += "&lt;";
        else out += c;
    }
}

struct StartTag {
    std::string name;
    std::vector<Attribute> attrs;
    std::size_t end = 0;   // position just past '>'
    bool dropped = false;  // unterminated at EOF
};

// Parses a start tag beginning at `pos` (input[pos] == '<', alpha next).
StartTag parse_start_tag(std::string_view in, std::size_t pos) {
    StartTag tag;
    std::size_t p = pos + 1;
    while (p < in.size() && !is_ws(in[p]) && in[p] != '/' && in[p] != '>')
        tag.name += to_lower(in[p++]);
    while (true) {
        while (p < in.size() && (is_ws(in[p]) || in[p] == '/')) {
            if (in[p] == '/' && p + 1 < in.size() && in[p + 1] == '>') {
                tag.end = p + 2;  // self-closing flag is ignored for HTML elements
                return tag;
            }
            ++p;
        }
        if (p >= in.size()) {
            tag.dropped = true;  // eof-in-tag: whole token dropped
            tag.end = in.size();
            return tag;
        }
        if (in[p] == '>') {
            tag.end = p + 1;
            return tag;
        }
        Attribute attr;
        if (in[p] == '=') attr.name += in[p++];  // '=' may open a (bogus) name
        while (p < in.size() && !is_ws(in[p]) && in[p] != '/' && in[p] != '>' && in[p] != '=')
            attr.name += to_lower(in[p++]);
        while (p < in.size() && is_ws(in[p])) ++p;
        if (p < in.size() && in[p] == '=') {
            ++p;
            while (p < in.size() && is_ws(in[p])) ++p;
            if (p < in.size() && (in[p] == '"' || in[p] == '\'')) {
                char quote = in[p++];
                std::size_t close = in.find(quote, p);
                if (close == std::string_view::npos) {
                    tag.dropped = true;
                    tag.end = in.size();
                    return tag;
                }
                attr.value = decode_charrefs(in.substr(p, close - p));
                p = close + 1;
            } else {
                std::size_t start = p;
                while (p < in.size() && !is_ws(in[p]) && in[p] != '>') ++p;
                attr.value = decode_charrefs(in.substr(start, p - start));
            }
        }
        bool duplicate = std::any_of(tag.attrs.begin(), tag.attrs.end(),
                                     [&](const Attribute& a) { return a.name == attr.name; });
        if (!duplicate && !attr.name.empty()) tag.attrs.push_back(std::move(attr));
    }
}

// Finds the end of "</name ... >" content for a raw-text element; returns
// the offset just past the closing '>' and sets `found`. Matching is
// ASCII-case-insensitive with a proper name boundary.
std::size_t skip_rawtext(std::string_view in, std::size_t pos, std::string_view name, bool& found) {
    std::size_t p = pos;
    while (p + 1 < in.size()) {
        std::size_t lt = in.find('<', p);
        if (lt == std::string_view::npos || lt + 1 >= in.size()) break;
        if (in[lt + 1] != '/') {
            p = lt + 1;
            continue;
        }
        std::size_t q = lt + 2;
        bool match = q + name.size() <= in.size();
        for (std::size_t k = 0; match && k < name.size(); ++k)
            match = to_lower(in[q + k]) == name[k];
        if (match) {
            std::size_t after = q + name.size();
            if (after >= in.size() || is_ws(in[after]) || in[after] == '/' || in[after] == '>') {
                std::size_t gt = in.find('>', after);
                found = true;
                return gt == std::string_view::npos ? in.size() : gt + 1;
            }
        }
        p = lt + 1;
    }
    found = false;
    return in.size();
}

}  // namespace

std::string sanitize_html_bytes(std::string_view raw, const SanitizeOptions& opts) {
    std::string input;
    if (raw.find('\0') != std::string_view::npos) {
        // Lossy decode: NUL becomes U+FFFD, as a browser tokenizer would.
        input.reserve(raw.size());
        for (char c : raw)
            if (c == '\0') input += "\xEF\xBF\xBD";
            else input += c;
        raw = input;
    }

    std::string out;
    out.reserve(raw.size() / 2);
    std::vector<std::string> stack;
    std::size_t elements = 0;

    auto emit_close = [&](const std::string& name) {
        out += "</";
        out += name;
        out += '>';
    };

    std::size_t pos = 0;
    const std::size_t n = raw.size();
    while (pos < n) {
        if (raw[pos] != '<') {
            ++pos;  // text is dropped
            continue;
        }
        if (pos + 1 >= n) break;
        char next = raw[pos + 1];

        if (raw.compare(pos, 4, "<!--") == 0) {
            // Comment, including the abrupt forms <!--> and <!--->.
            std::size_t body = pos + 4;
            if (raw.compare(body, 1, ">") == 0) pos = body + 1;
            else if (raw.compare(body, 2, "->") == 0) pos = body + 2;
            else {
                std::size_t close = raw.find("-->", body);
                pos = close == std::string_view::npos ? n : close + 3;
            }
            continue;
        }
        if (next == '!' || next == '?') {
            // Doctype, CDATA, processing instructions: bogus-comment rule.
            std::size_t close = raw.find('>', pos + 2);
            pos = close == std::string_view::npos ? n : close + 1;
            continue;
        }
        if (next == '/') {
            if (pos + 2 >= n) break;
            if (!is_alpha(raw[pos + 2])) {
                // "</>" and friends: bogus, skip to '>'.
                std::size_t close = raw.find('>', pos + 2);
                pos = close == std::string_view::npos ? n : close + 1;
                continue;
            }
            std::size_t p = pos + 2;
            std::string name;
            while (p < n && !is_ws(raw[p]) && raw[p] != '/' && raw[p] != '>')
                name += to_lower(raw[p++]);
            std::size_t close = raw.find('>', p);
            if (close == std::string_view::npos) {
                pos = n;  // eof-in-tag
                continue;
            }
            pos = close + 1;
            auto it = std::find(stack.rbegin(), stack.rend(), name);
            if (it == stack.rend()) continue;  // stray end tag
            while (!stack.empty()) {
                std::string top = stack.back();
                stack.pop_back();
                emit_close(top);
                if (top == name) break;
            }
            continue;
        }
        if (!is_alpha(next)) {
            ++pos;  // '<' as literal text
            continue;
        }

        StartTag tag = parse_start_tag(raw, pos);
        pos = tag.end;
        if (tag.dropped) continue;
        ++elements;
        out += '<';
        out += tag.name;
        if (opts.keep_attributes) {
            for (const auto& attr : tag.attrs) {
                out += ' ';
                out += attr.name;
                out += "=\"";
                encode_attr_value(out, attr.value);
                out += '"';
            }
        }
        out += '>';

        if (tag.name == "plaintext") {
            stack.push_back(tag.name);
            pos = n;  // everything after <plaintext> is text
        } else if (is_rawtext_element(tag.name)) {
            bool found = false;
            pos = skip_rawtext(raw, pos, tag.name, found);
            if (found) emit_close(tag.name);
            else stack.push_back(tag.name);  // closed by the EOF unwind
        } else if (!is_void_element(tag.name)) {
            stack.push_back(tag.name);
        }
    }

    while (!stack.empty()) {
        emit_close(stack.back());
        stack.pop_back();
    }

    if (elements == 0)
        throw SanitizeError("input yields no elements (not parseable as HTML)");
    return out;
}

SanitizedDocument sanitize_html(const ByteDocument& raw, const SanitizeOptions& opts) {
    std::string skeleton = sanitize_html_bytes(raw.bytes, opts);
    SanitizedDocument result;
    result.original_len = raw.bytes.size();
    result.sanitized_len = skeleton.size();
    result.doc = ByteDocument{raw.id, std::move(skeleton), raw.source_path, raw.label,
                              raw.timestamp};
    return result;
}

}  // namespace phishsim
