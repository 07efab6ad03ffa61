#pragma once

#include <string>

#include "duwak/core.hpp"

namespace duwak::detail {

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string path;    // begins with '/', may be just "/"
};

inline UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(Errc::invalid_argument, "URL without scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string join_path(const std::string& base, const std::string& leaf) {
    if (base.empty() || base == "/") return leaf;
    if (base.back() == '/') return base + leaf.substr(1);
    return base + leaf;
}

}  // namespace duwak::detail
