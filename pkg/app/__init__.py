# Gesture-cued target speaker extraction
