#example "e" { @{ 1 / 0 }; }