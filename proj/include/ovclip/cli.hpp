#pragma once
namespace ovclip { int cli_main(int argc, char** argv); }
