#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
集成测试模块初始化
"""
