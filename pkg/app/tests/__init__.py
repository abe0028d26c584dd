"""
测试包初始化
"""