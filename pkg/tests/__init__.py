# Test configuration