#pragma once

#include "rbal/mdp.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace rbal {

inline constexpr int kMdpJsonVersion = 1;

/// Canonical form:
/// {"version":1,"n":N,"gamma":G,"actions":[{"state":s,"reward":r,"transitions":[[s',p],...]},...]}
/// `meta`, when not null, is emitted under "meta" and ignored by the loader.
nlohmann::json mdp_to_json(const Mdp& mdp, const nlohmann::json& meta = nullptr);
/// Throws InvalidArgument on schema errors. Does not run validate_mdp.
Mdp mdp_from_json(const nlohmann::json& j);

std::string dump_mdp(const Mdp& mdp, const nlohmann::json& meta = nullptr);
Mdp parse_mdp(const std::string& text);

void save_mdp(const std::filesystem::path& path, const Mdp& mdp, const nlohmann::json& meta = nullptr);
Mdp load_mdp(const std::filesystem::path& path);

} // namespace rbal
