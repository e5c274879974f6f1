def bubble_sort(items):
    result = list(items)
    for i in range(len(result)):
        for j in range(len(result) - i):
            if result[j] > result[j + 1]:
                result[j], result[j + 1] = result[j + 1], result[j]
    return result
