# Quasipot test suite
