# Cascade popularity prediction package
