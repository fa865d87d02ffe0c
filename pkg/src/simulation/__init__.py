# Synthetic corpus generation
